#!/usr/bin/env python3
"""
Quick setup script for the gfnoma toolkit.
Writes a .env with the output/worker/debug defaults and checks the imports.
"""

import os
import sys


def main():
    print("\n" + "="*60)
    print("  gfnoma - Setup")
    print("="*60 + "\n")

    if os.path.exists('.env'):
        print("✓ .env file already exists")
        response = input("  Do you want to reconfigure it? (y/N): ").strip().lower()
        if response != 'y':
            print("\nKeeping existing .env file.")
            ok = test_imports()
            sys.exit(0 if ok else 1)

    out_dir = input("Output directory for CSVs and checkpoints [./results]: ").strip() or "./results"
    workers = input(f"Worker processes for BLER sweeps [{os.cpu_count() or 1}]: ").strip() or str(os.cpu_count() or 1)
    if not workers.isdigit() or int(workers) < 1:
        print(f"\n⚠ '{workers}' is not a positive integer, using 1.")
        workers = "1"
    create_env_file(out_dir, workers)
    print("\n✓ .env file created successfully!")

    ok = test_imports()

    print("\n" + "="*60)
    print("Setup complete!" if ok else "Setup incomplete: missing dependencies.")
    print("="*60)
    print("\nNext steps:")
    print("  1. Self-check the field arithmetic: python3 main.py field-check")
    print("  2. Quick BLER sweep: python3 main.py --preset quick bler")
    print("  3. Run the tests: pytest")
    print("\n")
    sys.exit(0 if ok else 1)


def create_env_file(out_dir, workers):
    """Create .env file with the toolkit defaults."""
    with open('.env', 'w') as f:
        f.write("# gfnoma configuration\n")
        f.write(f"GFNOMA_OUT={out_dir}\n")
        f.write(f"GFNOMA_WORKERS={workers}\n")
        f.write("\n# 1 = log algorithm decisions to stderr\n")
        f.write("GFNOMA_DEBUG=0\n")


def test_imports():
    """Test that all required modules can be imported."""
    print("\nTesting imports...")
    try:
        import rich
        print("  ✓ rich")
        import dotenv
        print("  ✓ python-dotenv")
        import numpy
        print("  ✓ numpy")
        import scipy
        print("  ✓ scipy")
        import matplotlib
        print("  ✓ matplotlib")

        from engine.galois import build_field
        print("  ✓ galois")
        from engine.harness import run_bler_sweep
        print("  ✓ harness")
        from engine.renderer import Renderer
        print("  ✓ renderer")

        print("\n✓ All dependencies installed correctly!")
        return True

    except ImportError as e:
        print(f"\n✗ Import error: {e}")
        print("\nPlease install dependencies:")
        print("  pip3 install -r requirements.txt\n")
        return False


if __name__ == "__main__":
    main()

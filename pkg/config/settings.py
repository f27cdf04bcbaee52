"""Toolkit configuration: field polynomials, coding and training defaults."""

import os

# Primitive polynomials per field degree k (bitmask, bit i = coefficient of x^i)
DEFAULT_PRIMITIVE_POLYS = {
    2: 0b111,  # x^2 + x + 1
    3: 0b1011,  # x^3 + x + 1
    4: 0b10011,  # x^4 + x + 1
    5: 0b100101,  # x^5 + x^2 + 1
    6: 0b1000011,  # x^6 + x + 1
    7: 0b10001001,  # x^7 + x^3 + 1
    8: 0x11D,  # x^8 + x^4 + x^3 + x^2 + 1
    9: 0x211,  # x^9 + x^4 + 1
    10: 0x409,  # x^10 + x^3 + 1
    11: 0x805,  # x^11 + x^2 + 1
    12: 0x1053,  # x^12 + x^6 + x^4 + x + 1
    13: 0x201B,  # x^13 + x^4 + x^3 + x + 1
    14: 0x4443,  # x^14 + x^10 + x^6 + x + 1
    15: 0x8003,  # x^15 + x + 1
    16: 0x1100B,  # x^16 + x^12 + x^3 + x + 1
}
MIN_FIELD_DEGREE = 2
MAX_FIELD_DEGREE = 16

# Outer convolutional code (constraint length 7)
CONV_GENERATORS = (0o171, 0o133)
CONV_MEMORY = 6

# Detector limits
MLD_SUBSET_BUDGET = 1_000_000  # sum_{t<=T} C(n, t); 637,393 for n=63, T=4
DL_DEFAULT_THRESHOLD = 0.5
SOFT_CHIP_FLOOR = 1e-12  # added to the mean square before the training-chip rescale

# Adam optimizer (only the learning rate comes from the reference setup)
ADAM_LEARNING_RATE = 1e-4
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

CHECKPOINT_FORMAT_VERSION = 1

# Multi-layer power domain
MAX_LAYERS = 4
POWER_GRID_LEVELS = 32
POWER_GRID_DYNAMIC_RANGE_DB = 30.0

# Monte Carlo engine
DEFAULT_MIN_ERROR_EVENTS = 100
TRIAL_CHUNK_SIZE = 250  # fixed so that worker count never changes chunking
CONFIDENCE_LEVEL = 0.95

EBN0_CALIBRATION = "sigma2 = A^2*T/(2*R*10^(EbN0_dB/10))"

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_ERROR = 2

# Environment defaults (populated from .env by the CLI)
DEFAULT_OUT_DIR = os.getenv("GFNOMA_OUT", "./results")
DEFAULT_WORKERS = int(os.getenv("GFNOMA_WORKERS", "1"))
DEBUG_FROM_ENV = os.getenv("GFNOMA_DEBUG", "0")  # "1", or comma-separated tags such as "SIC,POWER"

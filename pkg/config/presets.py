"""Named experiment presets, in the same section layout as a JSON config file."""

PRESETS = {
    # (63,39) BCH signatures, T = 4, rate-1/2 outer code, all three detectors
    "bch63_coded": {
        "scenario": {
            "scenario_id": "bch63_coded",
            "k": 6,
            "T": 4,
            "outer_rate": 0.5,
            "detectors": ["mld", "bma", "dl"],
            "dl_model": "results/bch63_coded_model.npz",
            "ebn0_grid_db": [0, 2, 4, 6, 8, 10],
            "activity": "fixed",
            "active_users": 4,
            "trials_per_point": 10000,
        },
        "train": {
            "k": 6,
            "T": 4,
            "rate": 0.5,
            "hidden_widths": [256, 256, 256, 256],
            "train_ebn0_db": [8.0],
            "checkpoint": "results/bch63_coded_model.npz",
        },
    },
    # same code without the outer code
    "bch63_uncoded": {
        "scenario": {
            "scenario_id": "bch63_uncoded",
            "k": 6,
            "T": 4,
            "outer_rate": 1.0,
            "detectors": ["mld", "bma", "dl"],
            "dl_model": "results/bch63_uncoded_model.npz",
            "ebn0_grid_db": [0, 2, 4, 6, 8, 10, 12],
            "activity": "fixed",
            "active_users": 4,
            "trials_per_point": 10000,
        },
        "train": {
            "k": 6,
            "T": 4,
            "rate": 1.0,
            "hidden_widths": [256, 256, 256, 256],
            "train_ebn0_db": [8.0],
            "checkpoint": "results/bch63_uncoded_model.npz",
        },
    },
    # uncoded DL trained on two SNRs with user/SNR product weights
    "bch63_weighted": {
        "scenario": {
            "scenario_id": "bch63_weighted",
            "k": 6,
            "T": 4,
            "outer_rate": 1.0,
            "detectors": ["dl"],
            "dl_model": "results/bch63_weighted_model.npz",
            "ebn0_grid_db": [0, 2, 4, 6, 8, 10, 12, 14],
            "activity": "uniform",
            "trials_per_point": 10000,
        },
        "train": {
            "k": 6,
            "T": 4,
            "rate": 1.0,
            "hidden_widths": [256, 256, 256, 256],
            "train_ebn0_db": [8.0, 12.0],
            "product_weighting": True,
            "checkpoint": "results/bch63_weighted_model.npz",
        },
    },
    "desk": {
        "train": {
            "k": 6,
            "T": 4,
            "rate": 1.0,
            "hidden_widths": [256, 256, 256, 256],
            "epochs": 200,
            "train_size": 20000,
            "val_size": 2000,
            "checkpoint": "results/desk_model.npz",
        },
    },
    "full_scale": {
        "train": {
            "k": 6,
            "T": 4,
            "rate": 1.0,
            "hidden_widths": [2048, 2048, 2048, 2048],
            "epochs": 1000,
            "minibatch_size": 1024,
            "train_size": 1000000,
            "val_size": 100000,
            "checkpoint": "results/full_scale_model.npz",
        },
    },
    "quick": {
        "scenario": {
            "scenario_id": "quick",
            "k": 4,
            "T": 2,
            "outer_rate": 1.0,
            "detectors": ["bma", "mld"],
            "ebn0_grid_db": [0, 4, 8, "inf"],
            "trials_per_point": 500,
        },
        "train": {
            "k": 4,
            "T": 2,
            "rate": 1.0,
            "hidden_widths": [32, 32],
            "learning_rate": 1e-3,
            "epochs": 20,
            "train_size": 2000,
            "val_size": 400,
            "checkpoint": "results/quick_model.npz",
        },
        "power": {"k": 4, "T": 2, "load": [2, 2], "levels": 8, "trials": 100},
        "sysim": {
            "frame_count": 2000,
            "partitions": [{"cluster_id": "urllc", "gfru_count": 4, "signature_pool_size": 15,
                            "capability": 2, "rate": 4.0}],
        },
    },
}

import json
import os

SLOW_TESTS = bool(os.environ.get("DROID_SLOW_TESTS"))
"Set DROID_SLOW_TESTS=1 to run the end-to-end experiment checks (minutes to hours)."

SEEDS = {"demo": 1, "real": 2, "identify": 3, "train": 4, "eval": 5}

# Small enough for a full pipeline in a few seconds
TINY_CONFIG = json.dumps(
    {
        "seeds": SEEDS,
        "demo": {"angle_target_deg": 20.0, "duration": 0.3, "pose": "A"},
        "identify": {"population": 6, "parents": 3, "n_real": 2, "max_generations": 2},
        "ppo": {
            "total_updates": 1,
            "horizon": 8,
            "rollout_episodes_per_update": 1,
            "minibatch": 8,
            "epochs_per_update": 1,
        },
        "eval": {"episodes": 2, "offsets": [0.0, 0.05], "horizon": 8},
    }
)

MINIMAL_CONFIG = json.dumps(
    {
        "phi_true": {"door_stiffness": 0.05},
        "seeds": SEEDS,
    }
)

"""Coarse scenario configs shared by the golden-manifest tests.

Deliberately small resolutions: these runs exist to pin CLI outputs
byte-for-byte, not to verify numerics (the acceptance suite does that).
"""

GOLDEN_CONFIGS = {
    "baseline-circle": {
        "scenario": "baseline-circle",
        "curve": {"kind": "circle", "r": 1.0, "n": 96},
        "field": {"kind": "zero"},
        "params": {"sigma1": 1.0, "sigma2": 0.0},
        "control": {"snapshot_every": 200, "area_floor": 0.1256},
    },
    "killing-equivalence": {
        "scenario": "killing-equivalence",
        "curve": {"kind": "circle", "r": 1.0, "n": 96},
        "params": {"sigma1": 1.0, "sigma2": 0.0},
        "control": {"snapshot_dt": 0.05, "max_time": 0.2},
        "scenario_options": {"a": 1.0, "b": 0.5, "c": -0.3, "matched_times": 4},
    },
    "loss-of-convexity": {
        "scenario": "loss-of-convexity",
        "curve": {"kind": "parabola-closure", "n": 256},
        "field": {"kind": "saddle"},
        "params": {"sigma1": 1.0, "sigma2": 0.0},
        "control": {"snapshot_every": 500, "max_time": 0.6,
                    "stop_on_nonconvex": True},
        "scenario_options": {"eps_list": [0.08, 0.04], "delta": 1.0},
    },
    "round-point": {
        "scenario": "round-point",
        "curve": {"kind": "circle", "r": 0.05, "n": 128},
        "field": {"kind": "saddle"},
        "params": {"sigma1": 1.0, "sigma2": 0.0},
        "control": {"snapshot_area_ratio": 0.9, "area_floor": 1.44e-4},
        "scenario_options": {"region_r0": 0.1},
    },
    "identity-audit": {
        "scenario": "identity-audit",
        "curve": {"kind": "ellipse", "a": 0.8, "b": 0.5},
        "field": {"kind": "saddle"},
        "params": {"sigma1": 1.0, "sigma2": 0.0},
        "control": {"snapshot_every": 1, "max_time": 0.005},
        "scenario_options": {"ladder": [64, 91]},
    },
    "constants": {
        "scenario": "constants",
        "params": {"sigma1": 1.0, "sigma2": 0.0},
        "scenario_options": {"c0": 0.0, "c1": 0.0, "c2": 8.0, "case": "a"},
    },
}

"""Driving an experiment from a config file.

The same TOML file can be passed to ``irregular-em run``. The CSV it
writes does not depend on the number of worker threads.
"""
from irregular_em import harness

cfg = harness.ExperimentConfig(
    problem="G1",
    problem_params={"kappa": 1.0},
    n_list=(32, 64, 128, 256),
    n_ref_factor=16,
    paths=2000,
    seed=42,
    norms=("L1_terminal", "L1_sup"),
    truncation_m=(5, 10),
    output="g1_truncation.csv",
)
text = harness.dump_config(cfg)
print(text)
with open("g1_truncation.toml", "w") as fh:
    fh.write(text)

report = harness.run_experiment(harness.load_config("g1_truncation.toml"))
print(report.summary())
print("exit code:", report.exit_code)

print(harness.selftest())

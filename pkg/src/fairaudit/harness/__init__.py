from .evaluation import avg_error, disagreement_coefficient, mp_diameter
from .experiment import ExperimentConfig, ExperimentResults, run_experiment
from .generators import (
    build_class,
    gen_local_class,
    gen_random_class,
    gen_shattered,
    gen_threshold_class,
    ingest_csv,
    synthetic_dataset,
)
from .oracles import CountingOracle

from pathlib import Path

CONFIG_FILEPATH = Path("loopsoup/config/config.yaml")

# Bell(10); enumeration beyond this is refused unless the cap is raised
BELL_10 = 115975

# default relative truncation of the loop-length law
DEFAULT_TAIL_CUTOFF = 2.0 ** -60
MAX_TAIL_CUTOFF = 2.0 ** -20

# mantissa bits added on top of the cancellation bound of the cumulant recursion
PRECISION_GUARD_BITS = 64

EXPERIMENT_KINDS = (
    "finer-prob",
    "exact-prob",
    "isolated-moments",
    "size-d-moments",
    "limit-laws",
    "large-clusters",
    "loop-length-law",
    "size-gf",
    "er-baseline",
    "primitive-loops",
)

REPORT_FORMATS = ("csv", "json")

THREADS_ENV_VAR = "LOOPSOUP_THREADS"

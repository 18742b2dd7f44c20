import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Logging
LOG_LEVEL = os.getenv('RMMT_LOG_LEVEL', 'WARNING').upper()

# Tree construction
DEFAULT_LEAF_FILL = float(os.getenv('RMMT_LEAF_FILL', '0.75'))

# Benchmark defaults
DEFAULT_DURATION = float(os.getenv('RMMT_BENCH_DURATION', '10'))
DEFAULT_REPS = int(os.getenv('RMMT_BENCH_REPS', '3'))
DEFAULT_RETRY_LIMIT = int(os.getenv('RMMT_RETRY_LIMIT', '2'))
DEFAULT_SEED = int(os.getenv('RMMT_BENCH_SEED', '42'))
PRIVATE_VECTOR_LEN = int(os.getenv('RMMT_PRIVATE_VECTOR', '1024'))
NON_CRITICAL_FRACTION = float(os.getenv('RMMT_NON_CRITICAL_FRACTION', '0.01'))

# Retry budgets outside this range are accepted but are not part of the reference experiment
SWEEP_MAX_RETRIES = 2

# Sweep grid of the reference experiment
THREAD_SWEEP = tuple(range(10, 261, 10))
WRITE_PCT_SWEEP = (0.1, 0.3, 0.5)
RETRY_SWEEP = (0, 1, 2)


def print_config_info():
    print("RMMT Configuration:")
    print(f"  Log level: {LOG_LEVEL}")
    print(f"  Leaf fill: {DEFAULT_LEAF_FILL}")
    print(f"  Duration: {DEFAULT_DURATION}s x {DEFAULT_REPS} repetitions")
    print(f"  Retry limit: {DEFAULT_RETRY_LIMIT}")
    print(f"  Seed: {DEFAULT_SEED}")
    print(f"  Private vector: {PRIVATE_VECTOR_LEN} slots, "
          f"non-critical share {NON_CRITICAL_FRACTION:.2%}")


if __name__ == "__main__":
    print_config_info()

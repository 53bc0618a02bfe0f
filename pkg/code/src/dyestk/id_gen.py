import hashlib
import json

import numpy as np

SEED_MASK = (1 << 64) - 1


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    """
    Random stream of one Monte-Carlo trial. Depends only on (seed, trial), never on execution order.
    :param seed: 64-bit experiment seed.
    :param trial: Trial index.
    """
    key = ((int(seed) & SEED_MASK) << 64) | (int(trial) & SEED_MASK)
    return np.random.Generator(np.random.Philox(key=key))


def generate_run_id(command: str, config_dict: dict, seed: int) -> str:
    """
    Generate id for a run from its command, config and seed.
    """
    payload = json.dumps({"command": command, "config": config_dict, "seed": seed}, sort_keys=True, default=str)
    hash_object = hashlib.md5(payload.encode("utf-8"))
    return command + "_" + hash_object.hexdigest()[:12]

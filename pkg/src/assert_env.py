"""
AssertEnv - läs och verifiera env-variabler och bygg Config-objektet.

A local .env file is loaded first (python-dotenv); variables already set in
the environment win.

Environment variables:
- DATA_AREA_ROOT_DIR (default: /tmp/dimhunk_data)
- DIMHUNK_SEED (int, default: 20240101)
- DIMHUNK_TRIALS (int >= 1, default: 100)
- DIMHUNK_THREADS (int >= 1, default: 1)
- DIMHUNK_SAMPLE_CAP (int >= 2, default: 200000)
- SCALE_GRID_STEP (float in (0, 0.5], default: 0.01)
- ALPHA_GRID_STEP (float in (0, 0.5], default: 0.01)
- PLAN_FAILURE_PROB (float in (0, 1), default: 0.1)
- FULL_PRECISION (true/false, default: false)
"""
import logging
import os

from dotenv import load_dotenv

from .config import Config

log = logging.getLogger(__name__)

DEFAULTS = {
    "DATA_AREA_ROOT_DIR": "/tmp/dimhunk_data",
    "DIMHUNK_SEED": "20240101",
    "DIMHUNK_TRIALS": "100",
    "DIMHUNK_THREADS": "1",
    "DIMHUNK_SAMPLE_CAP": "200000",
    "SCALE_GRID_STEP": "0.01",
    "ALPHA_GRID_STEP": "0.01",
    "PLAN_FAILURE_PROB": "0.1",
    "FULL_PRECISION": "false",
}


def _parse_bool(value: str) -> bool:
    if value is None:
        return False
    v = value.strip().lower()
    return v in ("1", "true", "yes", "y", "t")


def _get(env, key: str) -> str:
    value = env.get(key, "")
    return value.strip() if value and value.strip() else DEFAULTS[key]


def _int_at_least(env, key: str, minimum: int) -> int:
    try:
        value = int(_get(env, key))
    except ValueError:
        raise EnvironmentError(f"{key} must be an integer.")
    if value < minimum:
        raise EnvironmentError(f"{key} must be at least {minimum}.")
    return value


def _float_in(env, key: str, low: float, high: float, include_high: bool) -> float:
    try:
        value = float(_get(env, key))
    except ValueError:
        raise EnvironmentError(f"{key} must be a number (float).")
    inside = low < value <= high if include_high else low < value < high
    if not inside:
        closing = "]" if include_high else ")"
        raise EnvironmentError(f"{key} must lie in ({low:g}, {high:g}{closing}.")
    return value


def load_config_from_env(use_dotenv: bool = True) -> Config:
    if use_dotenv:
        load_dotenv(override=False)
    env = os.environ

    try:
        master_seed = int(_get(env, "DIMHUNK_SEED"))
    except ValueError:
        raise EnvironmentError("DIMHUNK_SEED must be an integer.")

    return Config(
        data_area_root_dir=_get(env, "DATA_AREA_ROOT_DIR"),
        master_seed=master_seed,
        trials=_int_at_least(env, "DIMHUNK_TRIALS", 1),
        threads=_int_at_least(env, "DIMHUNK_THREADS", 1),
        sample_cap=_int_at_least(env, "DIMHUNK_SAMPLE_CAP", 2),
        grid_step=_float_in(env, "SCALE_GRID_STEP", 0.0, 0.5, True),
        alpha_step=_float_in(env, "ALPHA_GRID_STEP", 0.0, 0.5, True),
        failure_prob=_float_in(env, "PLAN_FAILURE_PROB", 0.0, 1.0, False),
        full_precision=_parse_bool(_get(env, "FULL_PRECISION")),
        raw_env={k: env.get(k) for k in DEFAULTS if k in env},
    )


def assert_env_and_report(use_dotenv: bool = True) -> Config:
    """
    Validera och logga en kort rapport (till stderr).
    Kastar EnvironmentError om något värde är felaktigt.
    """
    cfg = load_config_from_env(use_dotenv)

    log.info("AssertEnv: environment variables validated.")
    log.info(" - data_area_root_dir: %s", cfg.data_area_root_dir)
    log.info(" - master_seed: %d", cfg.master_seed)
    log.info(" - trials: %d", cfg.trials)
    log.info(" - threads: %d", cfg.threads)
    log.info(" - sample_cap: %d", cfg.sample_cap)
    log.info(" - grid_step: %g, alpha_step: %g", cfg.grid_step, cfg.alpha_step)
    log.info(" - failure_prob: %g", cfg.failure_prob)
    log.info(" - full_precision: %s", cfg.full_precision)

    return cfg

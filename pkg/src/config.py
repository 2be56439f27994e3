from dataclasses import dataclass, field


@dataclass
class Config:
    data_area_root_dir: str
    master_seed: int
    trials: int
    threads: int
    sample_cap: int
    grid_step: float
    alpha_step: float
    failure_prob: float
    full_precision: bool
    raw_env: dict = field(default_factory=dict)

from dataclasses import dataclass, field, fields

COMMANDS = ('compare', 'simulate', 'kl', 'table')
INPUT_COMMANDS = ('compare', 'kl', 'table')

DEFAULTS = {
    'bins': 50,
    'kernel': 'gaussian',
    'bandwidth': 'auto',
    'smoothing': 1.0,
    'padding': 0.05,
    'models': 'all',
    'mae_mode': 'relative_percent',
    'seed': 0,
    'si_mode': 'full_histogram',
    'marginal': 'round_empirical',
    'generator': 'degroot:w=0.3',
    'agents': 2000,
    'rounds': 7,
    'true_value': 100.0,
    'prior_sd': 5.0,
    'noise': 0.5,
    'peers': 100,
    'format': 'delimited',
    'jobs': 1,
    'kl_epsilon': 1e-6,
}


class ConfigError(ValueError):
    """Raised for unusable command-line settings (exit status 2)"""


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    output: str | None = None
    bins: int = DEFAULTS['bins']
    kernel: str = DEFAULTS['kernel']
    bandwidth: float | str = DEFAULTS['bandwidth']
    smoothing: float = DEFAULTS['smoothing']
    padding: float = DEFAULTS['padding']
    models: list = field(default_factory=list)
    mae_mode: str = DEFAULTS['mae_mode']
    seed: int = DEFAULTS['seed']
    si_mode: str = DEFAULTS['si_mode']
    marginal: str = DEFAULTS['marginal']
    round: str | None = None
    generator: str = DEFAULTS['generator']
    agents: int = DEFAULTS['agents']
    rounds: int = DEFAULTS['rounds']
    true_value: float = DEFAULTS['true_value']
    prior_sd: float = DEFAULTS['prior_sd']
    noise: float = DEFAULTS['noise']
    peers: int = DEFAULTS['peers']
    format: str = DEFAULTS['format']
    jobs: int = DEFAULTS['jobs']
    kl_epsilon: float = DEFAULTS['kl_epsilon']
    plot_json: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.command in INPUT_COMMANDS and not self.input:
            raise ConfigError(f"{self.command} requires --input")
        if self.command != 'kl' and not self.output:
            raise ConfigError(f"{self.command} requires --output")
        if self.bins < 2:
            raise ConfigError("--bins must be at least 2")
        if self.smoothing < 0:
            raise ConfigError("--smoothing must be non-negative")
        if self.peers < 0:
            raise ConfigError("--peers must be non-negative")
        if self.bandwidth != 'auto':
            try:
                self.bandwidth = float(self.bandwidth)
            except ValueError:
                raise ConfigError(f"--bandwidth must be a positive number or 'auto', got {self.bandwidth!r}")
            if not self.bandwidth > 0:
                raise ConfigError("--bandwidth must be positive")

    @classmethod
    def from_args(cls, args):
        """Build from an argparse namespace, splitting the model list"""
        values = {f.name: getattr(args, f.name) for f in fields(cls) if hasattr(args, f.name)}
        models = values.get('models')
        if isinstance(models, str):
            values['models'] = [name.strip() for name in models.split(',') if name.strip()]
        return cls(**values)

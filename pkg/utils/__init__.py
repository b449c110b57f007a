"""工具层初始化."""
from utils.seeding import STREAMS, derive_seeds, stream
from utils.synthetic import gaussian_mixture_2d, two_moons, uniform_noise

__all__ = [
    'STREAMS',
    'derive_seeds',
    'gaussian_mixture_2d',
    'stream',
    'two_moons',
    'uniform_noise',
]

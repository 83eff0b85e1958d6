import os
from typing import List, Optional, Sequence

import numpy as np
from django.conf import settings
from django.core.management.base import CommandError

from core.exceptions import SortitionError
from core.instances import Instance
from core.selection import (FAIR_FILL, FILL_MODES, Panel, PanelDistribution, Sampler, bad_fair_algorithm,
                            fgc_sampler, fgc_support, fixed_panel_algorithm, fixed_sampler, uniform_sampler,
                            uniform_support)

ALGORITHMS = ('uniform', 'fgc', 'fixed', 'bad-fair')

USAGE_ERROR = 2
CHECK_FAILED = 1


def usage_error(message: str) -> CommandError:
    return CommandError(message, returncode=USAGE_ERROR)


def check_failed(message: str) -> CommandError:
    return CommandError(message, returncode=CHECK_FAILED)


def load_instance(path: str) -> Instance:
    """Read an instance file, turning every failure into a usage error"""
    if not os.path.isfile(path):
        raise usage_error(f"Instance file not found: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return Instance.from_json(f.read())
    except SortitionError as e:
        raise usage_error(f"Cannot read {path}: {e}")


def parse_panel(text: Optional[str]) -> Optional[Panel]:
    if not text: return None
    try:
        return Panel.of(int(token) for token in text.split(','))
    except ValueError as e:
        raise usage_error(f"Bad --panel {text!r}: {e}")


def resolve_seed(command, seed: Optional[int]) -> int:
    """Fall back to the configured seed and say so on stderr"""
    if seed is None:
        seed = settings.SORTITION_DEFAULT_SEED
        command.stderr.write(f"Using default seed {seed}")
    return seed


def add_algorithm_arguments(parser):
    parser.add_argument('--algorithm', choices=ALGORITHMS, default='uniform')
    parser.add_argument('--k', type=int, help='Panel size (bad-fair always uses n/2)')
    parser.add_argument('--fill', choices=FILL_MODES, default=FAIR_FILL, help='FGC final-stage fill rule')
    parser.add_argument('--panel', help='Comma-separated agent indices for the fixed algorithm')


def _panel_size(instance: Instance, algorithm: str, k: Optional[int], panel: Optional[Panel]) -> int:
    if algorithm == 'bad-fair': return instance.n // 2
    if algorithm == 'fixed':
        if panel is None: raise usage_error("The fixed algorithm needs --panel")
        return len(panel)
    if k is None: raise usage_error(f"The {algorithm} algorithm needs --k")
    return k


def build_distribution(instance: Instance, algorithm: str, k: Optional[int], fill: str,
                       panel: Optional[Panel]) -> PanelDistribution:
    k = _panel_size(instance, algorithm, k, panel)
    if algorithm == 'uniform': return uniform_support(instance.n, k)
    if algorithm == 'fgc': return fgc_support(instance, k, fill=fill)
    if algorithm == 'fixed': return fixed_panel_algorithm(panel)
    return bad_fair_algorithm(instance.n)


def build_sampler(instance: Instance, algorithm: str, k: Optional[int], fill: str,
                  panel: Optional[Panel]) -> Sampler:
    k = _panel_size(instance, algorithm, k, panel)
    if algorithm == 'uniform': return uniform_sampler(instance.n, k)
    if algorithm == 'fgc': return fgc_sampler(instance, k, fill)
    return fixed_sampler(build_distribution(instance, algorithm, k, fill, panel))


def format_table(header: Sequence[str], rows: Sequence[Sequence], widths: Optional[List[int]] = None) -> str:
    """Fixed-width text table, numbers right-aligned"""
    widths = widths or [max(len(str(h)), 12) for h in header]
    def cell(value, width):
        if isinstance(value, (float, np.floating)): return f"{value:>{width}.6f}"
        return f"{str(value):>{width}}"
    lines = [' '.join(f"{h:>{w}}" for h, w in zip(header, widths))]
    lines += [' '.join(cell(v, w) for v, w in zip(row, widths)) for row in rows]
    return '\n'.join(lines)

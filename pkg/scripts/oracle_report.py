"""Solver vs brute-force grid on 2-antenna instances, one line per seed."""

import sys

import numpy as np

from swipt_secrecy import an, noan
from swipt_secrecy.channel import SystemParams, generate_channels
from swipt_secrecy.verify import grid_oracle_an, grid_oracle_no_an

seeds = range(int(sys.argv[1]) if len(sys.argv) > 1 else 10)
print(f"{'seed':>4} {'rate':>8} {'oracle':>8} {'power':>8} {'oracle':>8} {'f(t)':>9} {'oracle':>9}")
for seed in seeds:
    ch = generate_channels(2, 1, 1, seed)
    p_rate = SystemParams(2, 10.0, E_targets=3.0)
    p_pow = SystemParams(2, 10.0, E_targets=0.5)
    b = noan.max_secrecy_rate_bisection(ch, p_rate)
    o = grid_oracle_no_an("secrecy-max", ch, p_rate)
    pm = noan.power_min(1.0, ch, p_pow)
    op = grid_oracle_no_an("power-min", ch, p_pow, R=1.0)
    params = an.default_an_params(2, 10.0, 0.1, 1)
    t = float(np.sqrt(an.t_min(ch, params.P)))
    f = an.inner_f_of_t(t, ch, params).f
    of = grid_oracle_an(t, ch, params).objective

    def show(x, ok=True):
        return f"{x:8.4f}" if ok else f"{'infeas':>8}"

    print(f"{seed:>4} {show(b.achieved_rate, b.ok)} {show(o.objective, o.feasible)} "
          f"{show(pm.power, pm.ok)} {show(op.objective, op.feasible)} {f:9.4f} {of:9.4f}")

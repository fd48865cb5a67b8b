"""Print SCA tau traces on one channel draw at 0, 10, 20 and 30 dB."""

import sys

import numpy as np

from swipt_secrecy import an
from swipt_secrecy.channel import db_to_linear, generate_channels

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
ch = generate_channels(4, 3, 2, seed)
for p_db in (0, 10, 20, 30):
    params = an.default_an_params(4, db_to_linear(p_db), 0.1, 2)
    sol = an.max_secrecy_sca(ch, params)
    ls = an.max_secrecy_linesearch(ch, params, an.AnOptions(linesearch_points=25, refine="brent"))
    tr = np.array(sol.trace)
    print(f"P = {p_db:2d} dB  status {sol.solver_status}  SCA rate {sol.achieved_rate:.4f}  line search {ls.achieved_rate:.4f}")
    print("   tau:", " ".join(f"{v:.3e}" for v in tr))
    print("   |dtau|:", " ".join(f"{v:.1e}" for v in np.abs(np.diff(tr))))

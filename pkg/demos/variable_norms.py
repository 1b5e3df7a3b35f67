"""Variable-exponent norms and the exponent regularity checks.

Run with ``python demos/variable_norms.py``.
"""

import numpy as np

from psidobench.errors import ParameterError
from psidobench.grid import make_grid, sample
from psidobench.spaces import (check_log_holder_infinity, check_log_holder_local, check_nekvinda,
                               exponent, nekvinda_constant, vlp_norm)


def main():
    g = make_grid(1, 16.0, 1024)
    two_piece = sample(g, lambda x: ((x[..., 0] >= -1) & (x[..., 0] < 1)).astype(float))
    step = exponent("step", p1=2.0, p2=3.0)
    res = vlp_norm(two_piece, step)
    root = next(r.real for r in np.roots([1, 0, -1, -1]) if abs(r.imag) < 1e-12)
    print("norm of the indicator of [-1, 1) with p = 2 left of 0 and 3 right of 0")
    print(f"  bisection {res.value:.9f} after {res.iterations} steps; real root of t^3 = t + 1: {root:.9f}")

    exponents = [exponent("constant", p=2.0), exponent("log-decay", p_inf=2.0), step,
                 exponent("loglog", p_inf=2.0), exponent("plateau", p_inf=2.0, height=0.5)]
    print(f"\n{'exponent':>10} {'local c':>10} {'stab':>6} {'ok':>3} {'decay c':>10} {'ok':>3} {'integral':>10}")
    for p in exponents:
        local = check_log_holder_local(p, g)
        try:
            decay = check_log_holder_infinity(p, g)
            c = nekvinda_constant(decay.c_est, g.n) if decay.passed else 0.5
            nek = check_nekvinda(p, g, c)
            tail = (f"{decay.c_est:10.4g} {'y' if decay.passed else 'n':>3} "
                    f"{nek.integral_est:10.4g}")
        except ParameterError as exc:  # exponents without a limit at infinity
            tail = f"{'-':>10} {'-':>3} {type(exc).__name__:>10}"
        print(f"{p.identifier:>10} {local.c_est:10.4g} {local.stability:6.2f} "
              f"{'y' if local.passed else 'n':>3} {tail}")


if __name__ == "__main__":
    main()

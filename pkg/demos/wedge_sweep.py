"""Main solution-bound constant against the wedge opening angle, with a log-log fit."""
import numpy as np

from lipmax.config import load_config
from lipmax.suites import Context, run_sweep


def main():
    rep = run_sweep(Context(load_config("wedge_suite")))
    fit = rep.by_id("sweep_slope")[0].constants
    print(f"{'alpha':>8} {'M':>10} {'constant':>14}")
    for c in rep.by_id("sweep_graph_trace"):
        k = c.constants
        print(f"{k['alpha']:8.3f} {k['M']:10.4f} {k['main_constant']:14.6g}")
    print(f"fitted slope d log C / d log alpha = {fit['slope']:.4f}")
    a = np.array(fit["alphas"])
    print("constant * alpha^2:", np.round(np.array(fit["main_constants"]) * a ** 2, 2))


if __name__ == "__main__":
    main()

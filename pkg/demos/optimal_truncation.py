"""Error of the order-N ansatz against the reference solver at two eps values.

Prints the error table for the avoided-crossing scenario and the order at
which the series stops improving.  Takes about two minutes on one core.

    python demos/optimal_truncation.py
"""

from hagprop.config import load_config, scenario_path
from hagprop.truncation import prepare, sweep_orders


def main():
    sc, _ = load_config(scenario_path("avoided_crossing"))
    sc.n_max = 10
    prep = prepare(sc)
    print(f"expansion built in {prep.seconds:.1f}s")
    for eps in (0.3, 0.2):
        s = sweep_orders(prep, eps, residual=True)
        print(f"\neps = {eps}")
        print(" N        error        bound")
        for N, e, b in zip(s.orders, s.errors, s.bounds):
            print(f"{N:2d}  {e:11.3e}  {b:11.3e}")
        print(f"smallest error at N = {s.argmin}")


if __name__ == "__main__":
    main()

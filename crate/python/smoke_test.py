"""Smoke test for the powergame Python extension.

Build the extension and put it on the import path first, e.g.

    cargo build --release -p powergame-py --features extension-module
    cp target/release/libpowergame_py.so python/powergame.so
    python3 python/smoke_test.py
"""

import json
import math

import powergame


def close(a, b, tol):
    return all(abs(x - y) <= tol for x, y in zip(a, b)) and len(a) == len(b)


def main():
    # Example channel: normalized noise {4, 1} / {1, 4}, cross gain 0.5.
    ch = powergame.Channel.two_user([4.0, 1.0], [1.0, 4.0], 0.5)
    assert (ch.num_users, ch.num_bins) == (2, 2)
    assert ch.is_diagonally_dominant()

    ne = powergame.iterative_waterfilling(ch, [10.0])
    assert ne["converged"]
    assert close(ne["allocations"][0]["power"], [2.0, 8.0], 1e-6)
    assert abs(ne["rates"][0] - math.log2(6.25)) < 1e-6

    se = powergame.exhaustive_stackelberg(ch, [10.0], grid_step=0.01)
    assert close(se["allocations"][0]["power"], [0.0, 10.0], 1e-9)
    assert abs(se["rates"][0] - 2.939) < 5e-3

    alg = powergame.algorithm1_dual(ch, [10.0])
    assert alg["rates"][0] >= ne["rates"][0] - 1e-6

    alloc, r_max = powergame.interference_free_bound(ch, [10.0])
    bound = powergame.dual_bound(ch, [10.0], grid_step=0.1)
    assert se["rates"][0] <= bound["dual_value_bits"] + 1e-6 <= r_max + 1e-6
    assert abs(powergame.leader_objective(ch, [10.0], [0.0, 10.0]) - se["rates"][0]) < 1e-12

    closed = powergame.waterfill([11.0, 1.0], 10.0)
    bisect = powergame.waterfill([11.0, 1.0], 10.0, method="bisection")
    assert close(closed, [0.0, 10.0], 0.0) and close(closed, bisect, 1e-8)

    report = powergame.reproduce_example(2)
    assert all(row["pass"] for row in report["rows"])

    assert powergame.empirical_cdf([1.0, 2.0, 3.0], [2.0]) == [(2.0, 2.0 / 3.0)]

    sampled = powergame.Channel.sample(2, 8, 0.5, seed=3)
    again = powergame.Channel.from_json(sampled.to_json())
    assert again.to_json() == sampled.to_json()

    spec = {
        "trials": 3,
        "master_seed": 1,
        "budget": 20.0,
        "topology": {"num_users": 2, "num_bins": 4, "cross_power": 0.5, "noise": 0.01},
    }
    out = powergame.run_experiment(json.dumps(spec))
    assert len(out["records"]) == 3 and out["summary"]["trials"] == 3
    assert out == powergame.run_experiment(json.dumps(spec))

    try:
        powergame.Channel.from_json('{"num_users": 2,\n "num_bins": x}')
    except ValueError as e:
        assert "line 2" in str(e)
    else:
        raise AssertionError("malformed JSON accepted")

    print("powergame", powergame.__version__, "smoke test passed")


if __name__ == "__main__":
    main()

"""Smoke test for the extension module. Run after `maturin develop`."""

import json
import math

import bcsoftmax_py as bc


def close(p, q, tol=1e-9):
    return all(abs(a - b) <= tol for a, b in zip(p, q))


def main():
    x = [-1.5, 1.0, -0.5]
    b = [1.0, 0.6, 0.5]

    p = bc.bcsoftmax(x, b=b)
    assert close(p, [0.10757, 0.6, 0.29243], 1e-5), p
    assert close(p, bc.bcsoftmax(x, b=b, algo="quadratic"))
    assert close(p, bc.ubsoftmax(x, b))
    assert close(p, bc.solve_enumerate(x, b=b))
    assert close(bc.bcsoftmax(x), bc.softmax(x), 1e-12)

    _, lower, upper = bc.bcsoftmax_active(x, b=b)
    assert lower == [False] * 3 and upper == [False, True, False]

    q = bc.bcsoftmax([0.0, 0.0, 2.0], a=[0.3, 0.0, 0.0])
    assert close(q, bc.lbsoftmax([0.0, 0.0, 2.0], [0.3, 0.0, 0.0]))

    c, C = bc.scalar_bounds_to_clip(x, 0.1, 0.6)
    clipped = [min(max(v, c), C) for v in x]
    assert close(bc.softmax(clipped), bc.bcsoftmax(x, a=[0.1] * 3, b=[0.6] * 3))

    gx, ga, gb = bc.vjp(x, [1.0, 0.0, 0.0], b=b)
    assert abs(sum(bc.jvp(x, [1.0, 2.0, 3.0], [0.0] * 3, [0.0] * 3, b=b))) < 1e-12
    assert len(gx) == len(ga) == len(gb) == 3

    assert bc.ece([[0.35, 0.65], [0.38, 0.62]], [1, 0]) == 0.135

    logits, labels, feats = bc.gen_synthetic(400, 4, scale=3.0, seed=1)
    model = bc.CalibModel.fit("TS", logits, labels, epochs=20)
    assert model.kind == "TS" and model.tau > 1.0
    again = bc.CalibModel.from_json(model.to_json())
    assert again.predict(logits[0]) == model.predict(logits[0])
    pb = bc.CalibModel.fit("PB-L", logits, labels, features=feats, epochs=2)
    probs = pb.predict(logits[0], feats[0])
    assert math.isclose(sum(probs), 1.0, abs_tol=1e-9)
    assert json.loads(pb.to_json())["kind"] == "PB-L"

    try:
        bc.bcsoftmax(x, a=[0.5] * 3)
    except ValueError:
        pass
    else:
        raise AssertionError("infeasible bounds accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()

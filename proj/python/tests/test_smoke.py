"""Smoke tests for the _bitseq extension against numpy references."""

import sys

import numpy as np

import _bitseq as bq


def check(name, cond):
    if not cond:
        print(f"FAIL {name}")
        sys.exit(1)
    print(f"ok   {name}")


def main():
    rng = np.random.default_rng(7)

    # round_clamp: half away from zero, then clamp
    z = np.array([[0.0, 200.4, -1.5, 0.5]], dtype=np.float32)
    out = bq.round_clamp(z, -128, 127)
    check("round_clamp", np.array_equal(out, [[0.0, 127.0, -2.0, 1.0]]))

    # absmax / absmean scales vs numpy
    x = rng.normal(size=(4, 8)).astype(np.float32)
    gamma = bq.absmax_scale(x)
    check("absmax_scale", abs(gamma - 127.0 / (np.abs(x).max() + 1e-5)) < 1e-4)
    beta = bq.absmean_scale(x)
    check("absmean_scale", abs(beta - 1.0 / (np.abs(x).mean() + 1e-5)) < 1e-4)

    codes, beta2 = bq.quantize_weights_ternary(x)
    check("ternary codes", set(np.unique(codes)) <= {-1.0, 0.0, 1.0})
    check("ternary beta", abs(beta2 - beta) < 1e-6)

    # weight-only bitlinear: sign matrix times a constant equals full precision
    s = np.where(rng.random((5, 6)) < 0.5, -1.0, 1.0).astype(np.float32) * 0.4
    xin = rng.normal(size=(3, 6)).astype(np.float32)
    y = bq.bitlinear_forward(xin, s, mode="weight", eps=1e-9)
    check("bitlinear sign identity", np.allclose(y, xin @ s.T, atol=1e-5))

    # int8 vectorwise with alpha=0 falls back to the exact float product
    w = rng.normal(size=(6, 4)).astype(np.float32)
    y0 = bq.int8_vectorwise_matmul(xin, w, alpha=0.0)
    check("int8 alpha=0 exact", np.array_equal(y0, xin @ w))

    # packing round trip + packed matvec vs numpy
    t = rng.integers(-1, 2, size=(7, 13)).astype(np.float32)
    for enc in ("two_bit", "base243"):
        payload, rows, cols, scale = bq.pack_ternary(t, enc, 0.5)
        u = bq.unpack_ternary(payload, rows, cols, enc)
        check(f"pack round trip {enc}", np.array_equal(u, t))
        vec = rng.normal(size=13).astype(np.float32)
        got = bq.packed_matvec(payload, rows, cols, enc, 0.5, list(vec))
        check(f"packed_matvec {enc}", np.allclose(got, (t @ vec) * 0.5, atol=1e-5))

    # metrics vs numpy brute force
    gt = rng.normal(size=(12, 2)).astype(np.float32)
    samples = [rng.normal(size=(12, 2)).astype(np.float32) for _ in range(5)]
    ades = [np.linalg.norm(s - gt, axis=1).mean() for s in samples]
    fdes = [np.linalg.norm(s[-1] - gt[-1]) for s in samples]
    check("min_ade", abs(bq.min_ade(samples, gt) - min(ades)) < 1e-6)
    check("min_fde", abs(bq.min_fde(samples, gt) - min(fdes)) < 1e-6)

    # census of the full-size shape
    check("census 97", bq.count_replacement_sites(6, 6, 64, 128, 4) == (36, 60, 1, 97))

    # tokenizer round trip
    vocab = bq.train_bpe(["1.25,3.50 1.50,3.75", "1.25,4.00 1.75,4.25"], 40)
    ids = bq.bpe_encode(vocab, "1.25,3.50")
    check("bpe round trip", bq.bpe_decode(vocab, ids) == "1.25,3.50")

    parsed = bq.parse_answer("1.25,-3.50 2.00,4.00")
    check("parse_answer", isinstance(parsed, np.ndarray) and parsed.shape == (2, 2))
    failed = bq.parse_answer("1.25,oops")
    check("parse_answer failure", failed == ("decode_failure", "non-numeric token"))

    # nf4 codebook: 16 strictly increasing, symmetric levels
    cb = np.array(bq.nf4_codebook())
    check("nf4 monotone", np.all(np.diff(cb) > 0) and len(cb) == 16)
    check("nf4 symmetric", np.allclose(cb, -cb[::-1], atol=1e-6))

    print("all python smoke tests passed")


if __name__ == "__main__":
    main()

"""Smoke test for the bfsplit Python extension.

Build and install the module first, e.g.

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/bfsplit-*.whl

then run `python python/smoke_test.py`.
"""

import csv
import io
import math

import bfsplit


def check(cond, msg):
    if not cond:
        raise AssertionError(msg)


def main():
    # Conversions: ties to even, fp16 overflow.
    check(bfsplit.bf16_bits(1.0 + 2.0**-8) == 0x3F80, "bf16 tie")
    check(bfsplit.bf16_value(0x3F80) == 1.0, "bf16 widen")
    check(bfsplit.fp16_bits(65504.0) == 0x7BFF, "fp16 max")
    check(bfsplit.fp16_bits(2.0**-25) == 0, "fp16 underflow")
    check(math.isinf(bfsplit.fp16_value(bfsplit.fp16_bits(1e6))), "fp16 overflow")

    # Split: exact three-way reconstruction.
    a = 1.0 + 2.0**-20
    parts = bfsplit.split(a, 3)
    check(parts == [1.0, 2.0**-20, 0.0], f"split {parts}")

    # Dot and GEMM kernels.
    x = bfsplit.gen_vector("uniform", 1, 256)
    y = bfsplit.gen_vector("uniform", 2, 256)
    exact = math.fsum(p * q for p, q in zip(x, y))
    z2 = bfsplit.dot_split(x, y, "b3x6")
    z32 = bfsplit.dot_f32(x, y)
    err, bound, slack, ok = bfsplit.check_bound("bf16_z2", x, y, z2)
    check(ok and slack >= 0 and abs(z2 - exact) == err, "z2 bound")
    check(bfsplit.check_bound("fp32_dot", x, y, z32)[3], "fp32 bound")

    A = bfsplit.gen_matrix("uniform", 3, 8, 5)
    B = bfsplit.gen_matrix("uniform", 4, 5, 6)
    C = bfsplit.gemm_split(A, B, "b3x6d")
    C32 = bfsplit.gemm_f32(A, B)
    check(len(C) == 8 and len(C[0]) == 6, "gemm shape")
    ref = [[math.fsum(A[i][k] * B[k][j] for k in range(5)) for j in range(6)] for i in range(8)]
    worst = max(abs(C[i][j] - ref[i][j]) for i in range(8) for j in range(6))
    check(worst < 1e-6, f"gemm error {worst}")
    check(len(C32) == 8, "gemm f32 shape")

    # Solvers.
    n = 30
    M = bfsplit.gen_matrix("cond", 5, n, cond=100.0)
    b = [float(v) for v in bfsplit.gen_vector("uniform", 6, n)]
    x_ir, rep = bfsplit.iterative_refinement(M, b, "fp32", cond=100.0)
    check(rep.converged and len(rep.residual_history) == rep.iterations + 1, repr(rep))

    D = bfsplit.gen_matrix("diagdom", 7, n)
    lu = bfsplit.getrf(D, "bf16")
    check(sorted(lu.permutation) == list(range(n)), "permutation")
    _, g = bfsplit.gmres(D, b, lu)
    _, plain = bfsplit.gmres(D, b)
    check(g.converged and g.iterations < plain.iterations, f"{g} vs {plain}")
    check(bfsplit.cond_estimate(D) >= 1.0, "cond estimate")
    x64 = bfsplit.getrf(D, "fp64").solve(b)
    res = max(abs(sum(D[i][j] * x64[j] for j in range(n)) - b[i]) for i in range(n))
    check(res < 1e-12, f"fp64 solve residual {res}")

    # Experiments.
    check(bfsplit.projected_speedup(16, "b3x6") == 16 / 6, "speedup")
    text = bfsplit.run_experiment("gemm-accuracy", sizes=[16], trials=2, dist="uniform")
    rows = list(csv.DictReader(io.StringIO(text)))
    check({r["scheme"] for r in rows} == {"b2x3", "sgemm", "b3x6", "b3x6d"}, "experiment rows")
    check(text == bfsplit.run_experiment("gemm-accuracy", sizes=[16], trials=2, dist="uniform"),
          "determinism")

    try:
        bfsplit.dot_split([1.0], [1.0, 2.0])
    except ValueError:
        pass
    else:
        raise AssertionError("length mismatch accepted")

    print("bfsplit smoke test passed")


if __name__ == "__main__":
    main()

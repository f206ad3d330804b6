#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the numpy fallback.

Times the convolution/pooling kernels on the classifier's three default
block shapes plus one full training step, for both backends.

    python benchmarks/bench_kernels.py [--batch 64] [--image 64] [--secs 1.0]
"""
import argparse
import time

import numpy as np

from tidwatch import cnn
from tidwatch.backends import reference

try:
    from tidwatch.backends import _native
except ImportError:
    _native = None


def timeit(fn, seconds):
    fn()  # warm up
    start = time.perf_counter()
    n = 0
    while time.perf_counter() - start < seconds:
        fn()
        n += 1
    return (time.perf_counter() - start) / n


def block_shapes(batch, image):
    config = cnn.CnnConfig(input_size=image)
    shapes = []
    cin, size = 1, image
    for block in config.blocks:
        shapes.append(((batch, cin, size, size), (block.out_channels, cin, 3, 3)))
        size = size - 2
        if block.pool:
            size //= 2
        cin = block.out_channels
    return shapes


def bench_kernels(impls, batch, image, seconds):
    rng = np.random.default_rng(0)
    print(f"\nkernel timings (batch {batch}, image {image}x{image}, ms/call)")
    header = f"{'shape':<22}{'op':<10}" + "".join(f"{impl.NAME:>12}" for impl in impls)
    print(header)
    print("-" * len(header))
    for x_shape, w_shape in block_shapes(batch, image):
        x = rng.standard_normal(x_shape)
        w = rng.standard_normal(w_shape)
        b = rng.standard_normal(w_shape[0])
        go = np.ones_like(impls[0].conv2d_forward(x, w, b, 1))
        rows = {
            "conv fwd": lambda impl, x=x, w=w, b=b: impl.conv2d_forward(x, w, b, 1),
            "conv bwd": lambda impl, x=x, w=w, go=go: impl.conv2d_backward(x, w, go, 1),
        }
        for op, call in rows.items():
            cells = "".join(
                f"{timeit(lambda impl=impl: call(impl), seconds) * 1e3:12.2f}"
                for impl in impls
            )
            print(f"{str(x_shape):<22}{op:<10}{cells}")


def bench_train_step(impls, batch, image, seconds):
    import tidwatch.backends as backends

    rng = np.random.default_rng(1)
    x = rng.standard_normal((batch, 1, image, image))
    y = rng.integers(0, 2, batch)
    print(f"\nfull training step (batch {batch}, ms/step)")
    originals = {
        name: getattr(backends, name)
        for name in ("conv2d_forward", "conv2d_backward", "maxpool2d_forward", "maxpool2d_backward")
    }
    try:
        for impl in impls:
            for name in originals:
                setattr(backends, name, getattr(impl, name))
            model = cnn.init_model(cnn.CnnConfig(input_size=image), seed=0)
            state = cnn.init_adam_state(model)
            ws = cnn.Workspace()

            def step():
                logits, _, caches = cnn.forward_activations(model, x, True, ws)
                grads = cnn._backward_from(model, logits, caches, y, ws)
                cnn.adam_step(model, grads, state, 1e-4)

            print(f"{impl.NAME:>12}: {timeit(step, seconds) * 1e3:8.1f} ms")
    finally:
        for name, fn in originals.items():
            setattr(backends, name, fn)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--image", type=int, default=64)
    parser.add_argument("--secs", type=float, default=1.0, help="min seconds per timing")
    args = parser.parse_args()

    impls = [reference]
    if _native is not None:
        impls.append(_native)
    else:
        print("compiled core not available; timing the numpy fallback only")
    bench_kernels(impls, args.batch, args.image, args.secs)
    bench_train_step(impls, args.batch, args.image, args.secs)


if __name__ == "__main__":
    main()

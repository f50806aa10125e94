#!/usr/bin/env python3
"""Regenerate include/vibdiag/daubechies.hpp and tests/data/dwt_reference.json.

Requires PyWavelets. The header stores the db1..db20 scaling filters (the
reconstruction low-pass filter) at full double precision; the JSON holds
reference decompositions used by the transform tests.
"""
import json
import math
import pathlib

import numpy as np
import pywt

ROOT = pathlib.Path(__file__).resolve().parent.parent


def write_header():
    lines = [
        "#pragma once",
        "",
        "// Generated by tools/gen_daubechies.py from PyWavelets. Do not edit.",
        "",
        "#include <array>",
        "#include <span>",
        "",
        "namespace vibdiag::detail {",
        "",
    ]
    for order in range(1, 21):
        h = pywt.Wavelet(f"db{order}").rec_lo
        lines.append(f"inline constexpr std::array<double, {len(h)}> kDb{order}{{")
        for c in h:
            lines.append(f"    {c!r},")
        lines.append("};")
        lines.append("")
    lines.append("/// Scaling (reconstruction low-pass) filter of dbN, N in [1, 20].")
    lines.append("inline std::span<const double> daubechies_scaling(int order) {")
    lines.append("  switch (order) {")
    for order in range(1, 21):
        lines.append(f"    case {order}: return kDb{order};")
    lines.append("    default: return {};")
    lines.append("  }")
    lines.append("}")
    lines.append("")
    lines.append("}  // namespace vibdiag::detail")
    (ROOT / "include/vibdiag/daubechies.hpp").write_text("\n".join(lines) + "\n")


def probe_signal(n):
    # Reproduced bit-for-bit-ish in the C++ tests (tolerance 1e-12).
    k = np.arange(n, dtype=float)
    return np.sin(0.37 * k) + 0.5 * np.cos(1.3 * k) + 0.01 * k


def write_fixtures():
    cases = []
    for family, n, levels, mode in [
        ("db1", 16, 2, "symmetric"),
        ("db2", 9, 1, "symmetric"),
        ("db2", 37, 2, "symmetric"),
        ("db4", 64, 3, "symmetric"),
        ("db10", 2048, 4, "symmetric"),
        ("db10", 301, 2, "symmetric"),
        ("db2", 64, 3, "periodization"),
        ("db10", 256, 2, "periodization"),
    ]:
        x = probe_signal(n)
        coeffs = pywt.wavedec(x, family, mode=mode, level=levels)
        cases.append({
            "family": family,
            "length": n,
            "levels": levels,
            "mode": mode,
            # approximation first, then details from coarsest to finest
            "coeffs": [c.tolist() for c in coeffs],
        })
    path = ROOT / "tests/data/dwt_reference.json"
    path.write_text(json.dumps(cases, indent=1) + "\n")


if __name__ == "__main__":
    write_header()
    write_fixtures()

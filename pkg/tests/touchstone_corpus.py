"""Random valid Touchstone files and a suite of malformed ones."""
import numpy as np

UNITS = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}


def random_touchstone(seed: int) -> str:
    rng = np.random.default_rng(seed)
    ports = int(rng.choice([1, 2]))
    unit = str(rng.choice(list(UNITS)))
    fmt = str(rng.choice(["RI", "MA", "DB"]))
    z0 = float(rng.choice([50.0, 75.0, rng.uniform(1, 200)]))
    n = int(rng.integers(1, 60))
    f = np.cumsum(rng.uniform(0.1, 10, n)) * 1e8 / UNITS[unit]
    lines = [f"! random file {seed}"]
    if rng.random() < 0.5:
        lines.append(f"! bias_voltage: {rng.uniform(-40, 40)!r}")
    lines.append(f"# {unit} S {fmt} R {z0!r}")
    for fk in f:
        row = [repr(float(fk))]
        for _ in range(ports**2):
            mag = rng.uniform(0.01, 1.0)
            ang = rng.uniform(-180, 180)
            if fmt == "RI":
                c = mag * np.exp(1j * np.deg2rad(ang))
                row += [repr(float(c.real)), repr(float(c.imag))]
            elif fmt == "MA":
                row += [repr(mag), repr(ang)]
            else:
                row += [repr(float(20 * np.log10(mag))), repr(ang)]
        lines.append(" ".join(row))
    return "\n".join(lines) + "\n"


# (name, text, line number of the offending line)
MALFORMED = [
    ("data before option line", "! c\n1.0 0.1 0.2\n# GHz S RI R 50\n", 2),
    ("unknown option", "# GHz S XX R 50\n1.0 0.1 0.2\n", 1),
    ("R without value", "# GHz S RI R\n1.0 0.1 0.2\n", 1),
    ("non-positive z0", "# GHz S RI R -50\n1.0 0.1 0.2\n", 1),
    ("non-numeric value", "# GHz S RI R 50\n1.0 0.1 0.2\n2.0 abc 0.2\n", 3),
    ("wrong column count", "# GHz S RI R 50\n1.0 0.1 0.2\n2.0 0.1 0.2 0.3\n", 3),
    ("non-monotonic frequency", "# GHz S RI R 50\n1.0 0.1 0.2\n2.0 0.1 0.2\n1.5 0.1 0.2\n", 4),
    ("duplicate option line", "# GHz S RI R 50\n1.0 0.1 0.2\n# GHz S RI R 50\n", 3),
    ("version 2 keyword", "# GHz S RI R 50\n[Version] 2.0\n1.0 0.1 0.2\n", 2),
    ("unsupported parameter type", "! y data\n# GHz Y RI R 50\n1.0 0.1 0.2\n", 2),
    ("bad metadata comment", "! sweep_direction: sideways\n# GHz S RI R 50\n1.0 0.1 0.2\n", 1),
]

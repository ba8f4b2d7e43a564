"""Ideal-gas volume calculator: ``idg N kT p`` prints ``N * kT / p``."""
import sys


def volume(n: float, kt: float, p: float) -> float:
    return n * kt / p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 3:
        print("usage: idg N kT p", file=sys.stderr)
        return 2
    try:
        n, kt, p = (float(a) for a in argv)
    except ValueError as exc:
        print(f"idg: {exc}", file=sys.stderr)
        return 2
    print(volume(n, kt, p))
    return 0


if __name__ == "__main__":
    sys.exit(main())

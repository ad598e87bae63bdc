"""Plain-text training log in the fixed line formats used by every solver."""
import sys

STARS = "*********************************"


class Printer:
    """Line sink; silent unless ``verbose``."""

    def __init__(self, verbose=True, stream=None):
        self.verbose = verbose
        self.stream = stream

    def __call__(self, line):
        if self.verbose:
            out = self.stream if self.stream is not None else sys.stdout
            out.write(line + "\n")
            out.flush()


SILENT = Printer(verbose=False)


def matrix_line(n, p):
    return "Matrix X, n=%d, p=%d" % (n, p)


def epoch_line(epoch, primal, elapsed):
    return "Epoch: %d, primal objective: %g, time: %g" % (epoch, primal, elapsed)


def gap_line(best):
    return "Best relative duality gap: %g" % best


def elapsed_line(elapsed):
    return "Time elapsed : %g" % elapsed


def lipschitz_line(L):
    return "Lipschitz constant: %g" % L


def memory_line(m):
    return "Memory parameter: %d" % m

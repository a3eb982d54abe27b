class Estimate(float):
    """A real value that also carries its Monte-Carlo standard error.

    Exact quantities have ``stderr == 0``. Behaves as a plain ``float`` in
    arithmetic and comparisons.
    """

    def __new__(cls, value: float, stderr: float = 0.0, R: int = 0):
        obj = super().__new__(cls, value)
        obj.stderr = float(stderr)
        obj.R = int(R)
        return obj

    @property
    def exact(self) -> bool:
        return self.stderr == 0.0 and self.R == 0

    def __repr__(self):
        if self.exact:
            return f"Estimate({float(self)!r})"
        return f"Estimate({float(self)!r}, stderr={self.stderr!r}, R={self.R})"

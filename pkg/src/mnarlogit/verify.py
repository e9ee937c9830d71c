"""Check the log-RR identities used by the correction against exact enumeration."""

from dataclasses import dataclass

from . import oracle
from .correction import log_rr_s_given_y, log_rr_y_given_s_exact
from .oracle import TruthSpec

IDENTITY_TOL = 1e-10
CHECKS = ("rr_y1_identity", "rr_y0_identity", "outcome_offset", "marginal_line1",
          "marginal_line2")


@dataclass(frozen=True)
class IdentityCheck:
    point: dict
    check: str
    error: float
    passed: bool


def check_point(point, tol=IDENTITY_TOL, inject_sign_error=False):
    """Run every identity at one grid point.

    ``inject_sign_error`` flips the sign of ``delta_y`` in the ``Y=0``
    identity; it exists so the checker can be shown to catch a wrong formula.
    """
    t = TruthSpec(point["beta0"], (point["beta_x"],), point["delta0"], (point["delta_x"],),
                  point["delta_y"])
    x = point["x"]
    ct = oracle.conditional_table(t, [x])
    dy = t.delta_y
    dy_y0 = -dy if inject_sign_error else dy
    lin_s = t.delta0 + t.delta_x[0] * x
    rr_y1 = log_rr_y_given_s_exact(dy, ct.p_y0_s1, "Y=1")
    rr_y0 = log_rr_y_given_s_exact(dy_y0, ct.p_y1_s1, "Y=0")
    errors = {
        "rr_y1_identity": rr_y1 - ct.log_rr_y1_given_s,
        "rr_y0_identity": rr_y0 - ct.log_rr_y0_given_s,
        "outcome_offset": (ct.logit("p_y1_s1") - ct.logit("p_y1"))
        - log_rr_s_given_y(t, [x]),
        "marginal_line1": lin_s + dy - rr_y1 - ct.logit("p_s1"),
        "marginal_line2": lin_s - rr_y0 - ct.logit("p_s1"),
    }
    return [IdentityCheck(point, name, abs(float(err)), abs(float(err)) <= tol)
            for name, err in errors.items()]


def verify_identities(points=None, tol=IDENTITY_TOL, inject_sign_error=False):
    points = oracle.default_grid() if points is None else points
    out = []
    for pt in points:
        out.extend(check_point(pt, tol, inject_sign_error))
    return out


def summarize(checks):
    """Per-check worst error and pass flag, in ``CHECKS`` order."""
    rows = []
    for name in CHECKS:
        sub = [c for c in checks if c.check == name]
        if not sub:
            continue
        worst = max(sub, key=lambda c: c.error)
        rows.append({"check": name, "points": len(sub), "max_error": worst.error,
                     "failures": sum(not c.passed for c in sub),
                     "passed": all(c.passed for c in sub)})
    return rows

"""Coefficient tables for explicit embedded Runge-Kutta pairs.

Each method ships as an immutable :class:`ButcherTableau` holding the stage
coupling coefficients, the solution and error weights, and the coefficients
of its dense-output interpolant. Coefficients are stored as the
highest-precision decimal literals published for each method; nothing is
derived from order conditions at runtime.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["ButcherTableau", "dopri5", "tsit5"]


@dataclass(frozen=True)
class ButcherTableau:
    """An explicit embedded Runge-Kutta pair with dense output.

    Attributes
    ----------
    stages:
        Number of stages ``s``.
    a:
        Strictly lower-triangular stage coupling matrix, shape ``(s, s)``.
    b:
        Solution weights, shape ``(s,)``.
    b_err:
        Error-estimate weights stored pre-subtracted (``b - b_hat``) so the
        embedded error estimate is a single weighted stage sum.
    c:
        Stage nodes in ``[0, 1]``, shape ``(s,)``.
    order:
        Order of the propagating solution.
    error_order:
        Order of the embedded estimate.
    interp_coeffs:
        Dense-output polynomial coefficients, shape ``(s, m)``. Row ``i``
        holds the coefficients of ``theta^1 .. theta^m`` of the weight
        polynomial of stage ``i`` in the normalized step coordinate
        ``theta``; the constant term is identically zero so the interpolant
        reproduces the left step endpoint.
    fsal:
        True when the last stage of an accepted step doubles as the first
        stage of the next step (``c[s-1] == 1`` and ``a[s-1] == b``).
    """

    stages: int
    a: np.ndarray
    b: np.ndarray
    b_err: np.ndarray
    c: np.ndarray
    order: int
    error_order: int
    interp_coeffs: np.ndarray
    fsal: bool

    def validate(self, tol: float = 1e-12) -> None:
        """Check internal consistency of the coefficient tables.

        Raises ``ValueError`` on the first violated condition. The checks
        are exact numeric conditions on the published coefficients: row-sum
        consistency, quadrature consistency of both weight vectors, the
        dense-output endpoint conditions, and the FSAL structure.
        """
        if self.a.shape != (self.stages, self.stages):
            raise ValueError("a must be (stages, stages)")
        if np.any(np.triu(self.a) != 0.0):
            raise ValueError("a must be strictly lower triangular")
        row_sums = self.a.sum(axis=1)
        if np.max(np.abs(row_sums - self.c)) > tol:
            raise ValueError("stage row sums must equal c")
        if abs(self.b.sum() - 1.0) > tol:
            raise ValueError("solution weights must sum to 1")
        if abs(self.b_err.sum()) > tol:
            raise ValueError("error weights must sum to 0")
        at_one = self.interp_coeffs.sum(axis=1)
        if np.max(np.abs(at_one - self.b)) > tol:
            raise ValueError("interpolant at theta=1 must reproduce b")
        if self.fsal:
            if self.c[-1] != 1.0 or np.max(np.abs(self.a[-1] - self.b)) > tol:
                raise ValueError("fsal requires c[-1] = 1 and a[-1] = b")


def _expand_interp(factored: list[list[np.ndarray]]) -> np.ndarray:
    """Multiply out per-stage factored polynomials (highest power first)
    and return ascending coefficients of theta^1..theta^4."""
    rows = []
    for factors in factored:
        poly = np.array([1.0])
        for f in factors:
            poly = np.polymul(poly, f)
        if poly[-1] != 0.0:
            raise AssertionError("interpolant must vanish at theta = 0")
        # np.polymul returns highest power first; drop the zero constant
        # term and flip to ascending theta^1..theta^4.
        rows.append(poly[:-1][::-1])
    return np.array(rows)


def dopri5() -> ButcherTableau:
    """The 7-stage Dormand-Prince 5(4) pair with its 4th-order interpolant.

    Coefficients from Dormand & Prince (1980); the dense-output matrix is
    the standard one used by e.g. MATLAB's ode45 and scipy's RK45.
    """
    a = np.zeros((7, 7))
    a[1, :1] = [1 / 5]
    a[2, :2] = [3 / 40, 9 / 40]
    a[3, :3] = [44 / 45, -56 / 15, 32 / 9]
    a[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
    a[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
    a[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
    b = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
    b_err = np.array(
        [
            71 / 57600,
            0.0,
            -71 / 16695,
            71 / 1920,
            -17253 / 339200,
            22 / 525,
            -1 / 40,
        ]
    )
    c = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
    interp = np.array(
        [
            [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
            [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
            [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
            [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
            [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
        ]
    )
    return ButcherTableau(
        stages=7,
        a=a,
        b=b,
        b_err=b_err,
        c=c,
        order=5,
        error_order=4,
        interp_coeffs=interp,
        fsal=True,
    )


def tsit5() -> ButcherTableau:
    """The 7-stage Tsitouras 5(4) pair with its published interpolant.

    Coefficients from Tsitouras (2011). The interpolant weight polynomials
    are stored in their published factored form and multiplied out once at
    construction.
    """
    a = np.zeros((7, 7))
    a[1, :1] = [0.161]
    a[2, :2] = [-0.008480655492356989, 0.335480655492357]
    a[3, :3] = [2.8971530571054935, -6.359448489975075, 4.3622954328695815]
    a[4, :4] = [
        5.325864828439257,
        -11.748883564062828,
        7.4955393428898365,
        -0.09249506636175525,
    ]
    a[5, :5] = [
        5.86145544294642,
        -12.92096931784711,
        8.159367898576159,
        -0.071584973281401,
        -0.028269050394068383,
    ]
    a[6, :6] = [
        0.09646076681806523,
        0.01,
        0.4798896504144996,
        1.379008574103742,
        -3.290069515436081,
        2.324710524099774,
    ]
    b = np.array(
        [
            0.09646076681806523,
            0.01,
            0.4798896504144996,
            1.379008574103742,
            -3.290069515436081,
            2.324710524099774,
            0.0,
        ]
    )
    b_err = np.array(
        [
            -0.00178001105222577714,
            -0.0008164344596567469,
            0.007880878010261995,
            -0.1447110071732629,
            0.5823571654525552,
            -0.45808210592918697,
            0.015151515151515152,
        ]
    )
    c = np.array([0.0, 0.161, 0.327, 0.9, 0.9800255409045097, 1.0, 1.0])
    theta = np.array([1.0, 0.0])  # the bare factor theta
    theta2 = np.array([1.0, 0.0, 0.0])  # theta squared
    interp = _expand_interp(
        [
            [
                np.array([-1.0530884977290216]),
                np.array([1.0, -1.3299890189751412]),
                np.array([1.0, -1.4364028541716351, 0.7139816917074209]),
                theta,
            ],
            [np.array([0.1017]), np.array([1.0, -2.1966568338249754, 1.2949852507374631]), theta2],
            [
                np.array([2.490627285651252793]),
                np.array([1.0, -2.38535645472061657, 1.57803468208092486]),
                theta2,
            ],
            [
                np.array([-16.54810288924490272]),
                np.array([1.0, -1.21712927295533244]),
                np.array([1.0, -0.61620406037800089]),
                theta2,
            ],
            [
                np.array([47.37952196281928122]),
                np.array([1.0, -1.203071208372362603]),
                np.array([1.0, -0.658047292653547382]),
                theta2,
            ],
            [
                np.array([-34.87065786149660974]),
                np.array([1.0, -1.2]),
                np.array([1.0, -0.666666666666666667]),
                theta2,
            ],
            [np.array([2.5]), np.array([1.0, -1.0]), np.array([1.0, -0.6]), theta2],
        ]
    )
    return ButcherTableau(
        stages=7,
        a=a,
        b=b,
        b_err=b_err,
        c=c,
        order=5,
        error_order=4,
        interp_coeffs=interp,
        fsal=True,
    )

"""Matrix-free structured sketching operators with exact flop accounting.

Every operator is a node in a small expression tree.  A node records its
family tag, shape, field, the JSON-safe parameters that define it, the
seed that fixed whatever was sampled, and its children.  The descriptor
of the root reconstructs the whole tree bit for bit: each family
documents its sampling order and draws everything eagerly from a fresh
stream at construction time.

Flop accounting counts field operations per vector apply (a complex
operation is one operation here; :meth:`FlopTally.real_equivalent`
converts).  The conventions, which the budgets below rely on:

* multiplications by 0 and by real +-1 (sign flips) are free,
* index permutations move data and cost nothing,
* multiplications by general unit-modulus values count,
* the trivial twiddle w^0 inside Fourier levels counts, which keeps the
  abridged Fourier total at exactly 1.5*d*n.

Per-apply budgets enforced by the audit (n x n operator, one vector):

    abridged Hadamard, depth d        d*n adds (exact)
    scaled+permuted Hadamard          (d+1)*n
    abridged Fourier, depth d         1.5*d*n (exact)
    scaled+permuted Fourier           (1.5*d+1)*n
    recursively randomized, H / F     2*d*n / 2.5*d*n
    sparse f-circulant, q nonzeros    (2q-1)*n complex, q*n real adds
    uniformly sparse, q terms         q*n adds
    abridged f-circulant, depth d     (3d+3)*n
    inverse bidiagonal                2n-1 complex, n-1 real adds
    dense Gaussian baseline           (2n-1)*n
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .rng import RngStream, as_stream

DENSIFY_CAP = 4096

# sparse f-circulant applies switch from shifted sums to a cached dense
# product past this many nonzeros; the tally keeps the shifted-sum model
_SHIFT_SUM_MAX_Q = 32

_UNIT_TOL = 1e-12


class FlopTally:
    """Counters of field additions and multiplications.

    Monotone during an apply; merge() folds a child tally in.  Counts
    are per the conventions in the module docstring.
    """

    __slots__ = ("additions", "multiplications")

    def __init__(self, additions: int = 0, multiplications: int = 0):
        self.additions = int(additions)
        self.multiplications = int(multiplications)

    def count(self, additions: int = 0, multiplications: int = 0) -> None:
        self.additions += int(additions)
        self.multiplications += int(multiplications)

    def merge(self, other: "FlopTally") -> None:
        self.additions += other.additions
        self.multiplications += other.multiplications

    def reset(self) -> None:
        self.additions = 0
        self.multiplications = 0

    def total(self) -> int:
        return self.additions + self.multiplications

    def real_equivalent(self, field: str) -> int:
        """Total in real flops: complex add = 2, complex mul = 6."""
        if field == "complex":
            return 2 * self.additions + 6 * self.multiplications
        return self.total()

    def __repr__(self) -> str:
        return f"FlopTally(additions={self.additions}, multiplications={self.multiplications})"


def _as_batch(x: np.ndarray, length: int, what: str):
    X = np.asarray(x)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != length:
        raise ValueError(f"{what}: expected leading dimension {length}, got shape {np.asarray(x).shape}")
    return X, squeeze


def _is_free_values(values: np.ndarray) -> bool:
    # sign flips cost nothing; anything else is a multiplication
    if np.iscomplexobj(values):
        return bool(np.all(values.imag == 0.0) and np.all(np.abs(values.real) == 1.0))
    return bool(np.all(np.abs(values) == 1.0))


def _jsonify_scalar(z):
    if isinstance(z, complex) or np.iscomplexobj(np.asarray(z)):
        z = complex(z)
        if z.imag == 0.0:
            return float(z.real)
        return [float(z.real), float(z.imag)]
    return float(z)


def _unjsonify_scalar(v):
    if isinstance(v, list):
        return complex(v[0], v[1])
    return float(v)


class Multiplier:
    """A matrix-free linear operator node.

    apply(x) evaluates B @ x for x of shape (n_cols,) or (n_cols, k);
    apply_transpose / apply_adjoint evaluate B^T and B^H.  All three
    accept an optional FlopTally that accumulates the per-call cost.
    """

    __slots__ = ("family", "n_rows", "n_cols", "field", "params", "seed",
                 "children", "data")

    def __init__(self, family, shape, field, params, seed, children, data):
        self.family = family
        self.n_rows, self.n_cols = int(shape[0]), int(shape[1])
        self.field = field
        self.params = params
        self.seed = seed
        self.children = list(children)
        self.data = data

    # -- evaluation -----------------------------------------------------

    def apply(self, x, tally: FlopTally | None = None) -> np.ndarray:
        X, squeeze = _as_batch(x, self.n_cols, f"{self.family}.apply")
        out = _APPLY[self.family](self, X, tally)
        return out[:, 0] if squeeze else out

    def apply_transpose(self, y, tally: FlopTally | None = None) -> np.ndarray:
        Y, squeeze = _as_batch(y, self.n_rows, f"{self.family}.apply_transpose")
        kernel = _TRANSPOSE.get(self.family)
        if kernel is not None:
            out = kernel(self, Y, tally)
        else:
            out = np.conj(_ADJOINT[self.family](self, np.conj(Y), tally))
        return out[:, 0] if squeeze else out

    def apply_adjoint(self, y, tally: FlopTally | None = None) -> np.ndarray:
        Y, squeeze = _as_batch(y, self.n_rows, f"{self.family}.apply_adjoint")
        kernel = _ADJOINT.get(self.family)
        if kernel is not None:
            out = kernel(self, Y, tally)
        else:
            out = np.conj(_TRANSPOSE[self.family](self, np.conj(Y), tally))
        return out[:, 0] if squeeze else out

    def sketch(self, M: np.ndarray, tally: FlopTally | None = None) -> np.ndarray:
        """M @ B without densifying B (batched transpose applies)."""
        M = np.asarray(M)
        if M.ndim != 2 or M.shape[1] != self.n_rows:
            raise ValueError(f"sketch: M has shape {M.shape}, operator is "
                             f"{self.n_rows}x{self.n_cols}")
        return self.apply_transpose(M.T, tally).T

    def densify(self, cap: int = DENSIFY_CAP) -> np.ndarray:
        if max(self.n_rows, self.n_cols) > cap:
            raise ValueError(f"densify refused: order {self.shape} exceeds cap {cap}")
        dtype = complex if self.field == "complex" else float
        return self.apply(np.eye(self.n_cols, dtype=dtype))

    # -- structure ------------------------------------------------------

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    def descriptor(self) -> dict:
        params = dict(self.params)
        if self.family == "dense" and self.seed is None and "entries" not in params:
            # explicit matrices serialize lazily; catalogs wrap large arrays
            params["entries"] = [[_jsonify_scalar(z) for z in row]
                                 for row in self.data["matrix"]]
        d = {
            "family": self.family,
            "shape": [self.n_rows, self.n_cols],
            "field": self.field,
            "params": params,
            "seed": self.seed,
        }
        if self.children:
            d["children"] = [c.descriptor() for c in self.children]
        return d

    def rv_count(self) -> int:
        """Random variables consumed by this node and its children."""
        own = _RV_COUNT.get(self.family, lambda node: 0)(self)
        return own + sum(c.rv_count() for c in self.children)

    def unitary_constant(self):
        """c such that B^H B = c I for the full square operator, if known.

        Column restrictions inherit c (their columns stay orthogonal);
        row restrictions of a square c-unitary operator satisfy
        B B^H = c I instead.  Returns None when no constant is known.
        """
        fn = _UNITARY_CONSTANT.get(self.family)
        return None if fn is None else fn(self)

    def normalized(self) -> "Multiplier":
        """Scale wrapper making the operator unitary (or its restriction
        a slice of a unitary operator)."""
        c = self.unitary_constant()
        if c is None:
            raise ValueError(f"no unitary scaling constant known for family "
                             f"{self.family!r}")
        if c == 1:
            return self
        return scale(self, 1.0 / np.sqrt(c))

    def __repr__(self) -> str:
        return (f"Multiplier({self.family!r}, shape={self.shape}, "
                f"field={self.field!r}, seed={self.seed})")


def _spawn(rng) -> tuple[int, RngStream]:
    """Resolve an int-or-stream into a recorded seed plus a fresh stream."""
    if isinstance(rng, RngStream):
        seed = rng.spawn_seed()
    else:
        seed = int(as_stream(rng).seed)
    return seed, RngStream(seed)


# ---------------------------------------------------------------------------
# primitives


def permutation(n: int, rng=None, perm=None) -> Multiplier:
    """Permutation operator P with P @ e_j = e_{perm[j]}.

    Sampling order: one uniform permutation of {0..n-1}.
    """
    if n < 1:
        raise ValueError("order must be positive")
    if perm is not None:
        p = np.asarray(perm, dtype=np.intp)
        if p.shape != (n,) or not np.array_equal(np.sort(p), np.arange(n)):
            raise ValueError("explicit permutation must be a bijection on 0..n-1")
        seed = None
    else:
        if rng is None:
            raise ValueError("permutation needs rng or an explicit perm")
        seed, stream = _spawn(rng)
        p = stream.permutation(n).astype(np.intp)
    return Multiplier("permutation", (n, n), "real",
                      {"perm": p.tolist()} if seed is None else {},
                      seed, [], {"perm": p})


def unit_diagonal(n: int, rng=None, entries=None, field: str = "real") -> Multiplier:
    """Diagonal operator with unit-modulus entries.

    field="real" samples signs +-1; field="complex" samples uniformly on
    the unit circle.  Explicit entries must have |d_i| = 1 within 1e-12.
    Sampling order: the n diagonal entries.
    """
    if n < 1:
        raise ValueError("order must be positive")
    if entries is not None:
        e = np.asarray(entries)
        if e.shape != (n,):
            raise ValueError(f"expected {n} diagonal entries")
        if np.any(np.abs(np.abs(e) - 1.0) > _UNIT_TOL):
            raise ValueError("unit diagonal entries must have modulus 1")
        seed = None
        field = "complex" if np.iscomplexobj(e) else "real"
    else:
        if rng is None:
            raise ValueError("unit_diagonal needs rng or explicit entries")
        seed, stream = _spawn(rng)
        e = stream.unit_modulus(n) if field == "complex" else stream.signs(n)
    params = {"field_kind": field}
    if seed is None:
        params["entries"] = [_jsonify_scalar(z) for z in e]
    return Multiplier("diagonal", (n, n), field, params, seed, [],
                      {"entries": e, "free": _is_free_values(e)})


def diagonal(n: int, entries=None, rng=None, value_set=None) -> Multiplier:
    """General diagonal scaling, entries not restricted to modulus 1.

    With value_set given, samples n i.i.d. entries uniformly from it.
    """
    if entries is not None:
        e = np.asarray(entries, dtype=complex if np.iscomplexobj(np.asarray(entries)) else float)
        if e.shape != (n,):
            raise ValueError(f"expected {n} diagonal entries")
        seed = None
        params = {"entries": [_jsonify_scalar(z) for z in e]}
    else:
        if rng is None or value_set is None:
            raise ValueError("diagonal needs explicit entries or rng plus value_set")
        seed, stream = _spawn(rng)
        vs = np.asarray(value_set, dtype=float)
        e = vs[stream.integers(0, len(vs), size=n)]
        params = {"value_set": [float(v) for v in vs]}
    field = "complex" if np.iscomplexobj(e) else "real"
    params["field_kind"] = field
    return Multiplier("diagonal", (n, n), field, params, seed, [],
                      {"entries": e, "free": _is_free_values(e)})


def shift(n: int, f) -> Multiplier:
    """f-circular shift: (v_0..v_{n-1}) -> (f v_{n-1}, v_0, .., v_{n-2}).

    f = 0 gives the down-shift, |f| = 1 the f-circulant generator.
    """
    fz = complex(f)
    if fz != 0 and abs(abs(fz) - 1.0) > _UNIT_TOL:
        raise ValueError("shift parameter must be 0 or unit modulus")
    field = "complex" if fz.imag != 0.0 else "real"
    fval = fz if field == "complex" else fz.real
    return Multiplier("shift", (n, n), field, {"f": _jsonify_scalar(fval)},
                      None, [], {"f": fval})


def hadamard_primitive(n: int) -> Multiplier:
    """The block butterfly [[I_s, I_s], [I_s, -I_s]] of even order n = 2s."""
    if n < 2 or n % 2:
        raise ValueError("Hadamard primitive requires an even order")
    return Multiplier("hadamard_primitive", (n, n), "real", {}, None, [], {})


# ---------------------------------------------------------------------------
# abridged Hadamard / Fourier transforms


def _check_depth(n: int, d: int) -> None:
    if d < 1 or n % (1 << d):
        raise ValueError(f"depth {d} invalid: 2^{d} must divide the order {n}")


def abridged_hadamard(n: int, d: int) -> Multiplier:
    """Depth-d truncation of the Walsh-Hadamard recursion.

    d butterfly levels bottoming out at identity blocks; exactly d*n
    additions per vector apply and 2^d nonzeros per row and column.
    """
    _check_depth(n, d)
    return Multiplier("abridged_hadamard", (n, n), "real", {"d": d}, None, [], {})


def _fourier_twiddles(n: int, d: int) -> list:
    # level lev splits blocks of size n >> lev; twiddle for half-block h
    tw = []
    for lev in range(d):
        b = n >> lev
        h = b // 2
        tw.append(np.exp(2j * np.pi * np.arange(h) / b))
    return tw


def abridged_fourier(n: int, d: int) -> Multiplier:
    """Depth-d truncation of the radix-2 decimation-in-frequency FFT.

    Full depth d = log2(n) reproduces the DFT matrix with entries
    w^{ij}, w = exp(2 pi i / n).  Exactly 1.5*d*n operations per apply.
    """
    _check_depth(n, d)
    return Multiplier("abridged_fourier", (n, n), "complex", {"d": d}, None,
                      [], {"twiddles": _fourier_twiddles(n, d)})


def randomized_abridged(n: int, d: int, kind: str, rng, identity_pd: bool = False) -> Multiplier:
    """Abridged transform with fresh random permutation and scaling
    interleaved at every recursion block.

    kind "H" keeps the field real (sign scalings, free to apply, at most
    2*d*n operations); kind "F" is complex with unit-modulus scalings and
    costs at most 2.5*d*n.  identity_pd=True pins every permutation and
    scaling to the identity (a deterministic degenerate-randomness hook).

    Sampling order: for each level (outermost first), for each block left
    to right: the block's permutation, then its scaling entries.
    """
    _check_depth(n, d)
    if kind not in ("H", "F"):
        raise ValueError(f"kind must be 'H' or 'F', got {kind!r}")
    seed, stream = _spawn(rng)
    perms, diags = [], []
    for lev in range(d):
        b = n >> lev
        lev_p, lev_d = [], []
        for _ in range(1 << lev):
            if identity_pd:
                lev_p.append(np.arange(b, dtype=np.intp))
                lev_d.append(np.ones(b, dtype=complex if kind == "F" else float))
            else:
                lev_p.append(stream.permutation(b).astype(np.intp))
                lev_d.append(stream.unit_modulus(b) if kind == "F" else stream.signs(b))
        perms.append(lev_p)
        diags.append(lev_d)
    data = {"perms": perms, "diags": diags}
    if kind == "F":
        data["twiddles"] = _fourier_twiddles(n, d)
    return Multiplier("randomized_abridged", (n, n),
                      "complex" if kind == "F" else "real",
                      {"d": d, "kind": kind, "identity_pd": bool(identity_pd)},
                      seed, [], data)


# ---------------------------------------------------------------------------
# circulant and sparse families


def sparse_f_circulant(n: int, q: int, f=1.0, rng=None, positions=None,
                       values=None, value_kind: str = "signs") -> Multiplier:
    """f-circulant operator whose first column has exactly q nonzeros.

    Nonzero positions are uniform without replacement (stored sorted);
    value_kind selects "signs" (+-1), "unit" (unit circle, complex), or
    "gaussian" (dense subcirculant tables).  Applies evaluate the sum of
    q shifted copies of the input; past q = 32 a cached dense product is
    used while the tally keeps the shifted-sum cost model.

    Sampling order: the q positions, then the q values.
    """
    if not 1 <= q <= n:
        raise ValueError(f"nonzero count q={q} out of range 1..{n}")
    fz = complex(f)
    if abs(abs(fz) - 1.0) > _UNIT_TOL:
        raise ValueError("circulant parameter f must have modulus 1")
    if positions is not None:
        pos = np.sort(np.asarray(positions, dtype=np.intp))
        if pos.shape != (q,) or len(np.unique(pos)) != q or pos[0] < 0 or pos[-1] >= n:
            raise ValueError("positions must be q distinct indices in 0..n-1")
        vals = np.asarray(values)
        if vals.shape != (q,):
            raise ValueError(f"expected {q} values")
        seed = None
    else:
        if rng is None:
            raise ValueError("sparse_f_circulant needs rng or explicit positions/values")
        seed, stream = _spawn(rng)
        pos = np.sort(stream.choice_without_replacement(n, q).astype(np.intp))
        if value_kind == "signs":
            vals = stream.signs(q)
        elif value_kind == "unit":
            vals = stream.unit_modulus(q)
        elif value_kind == "gaussian":
            vals = stream.normal(q)
        else:
            raise ValueError(f"unknown value_kind {value_kind!r}")
    field = "complex" if (np.iscomplexobj(vals) or fz.imag != 0.0) else "real"
    fval = fz if field == "complex" else fz.real
    params = {"q": q, "f": _jsonify_scalar(fval), "value_kind": value_kind}
    if seed is None:
        params["positions"] = pos.tolist()
        params["values"] = [_jsonify_scalar(z) for z in vals]
    return Multiplier("sparse_f_circulant", (n, n), field, params, seed, [],
                      {"positions": pos, "values": vals, "f": fval,
                       "free": _is_free_values(vals) and fz in (1.0, -1.0)})


def uniformly_sparse(n: int, q: int, rng) -> Multiplier:
    """Sum of q independent signed permutations: at most q nonzeros per
    row and per column, applied with (q-1)*n additions.

    Sampling order: for each of the q terms, its permutation then its
    sign vector.
    """
    if not 1 <= q <= n:
        raise ValueError(f"term count q={q} out of range 1..{n}")
    seed, stream = _spawn(rng)
    perms = []
    signs = []
    for _ in range(q):
        perms.append(stream.permutation(n).astype(np.intp))
        signs.append(stream.signs(n))
    return Multiplier("uniformly_sparse", (n, n), "real", {"q": q}, seed, [],
                      {"perms": perms, "signs": signs})


def abridged_f_circulant(n: int, d: int, f=1.0, rng=None, u=None) -> Multiplier:
    """Unitary-up-to-scaling operator diagonalized by abridged Fourier
    factors: D_f^{-1} W^H diag(u) W D_f with W of depth d and |u_i| = 1.

    f = 1 drops the D_f conjugation entirely; the measured cost is then
    (3d+1)*n, within the (3d+3)*n budget that covers general f.
    Sampling order: the n unit-modulus values u.
    """
    _check_depth(n, d)
    fz = complex(f)
    if abs(abs(fz) - 1.0) > _UNIT_TOL:
        raise ValueError("circulant parameter f must have modulus 1")
    if u is not None:
        uv = np.asarray(u, dtype=complex)
        if uv.shape != (n,):
            raise ValueError(f"expected {n} spectral values")
        if np.any(np.abs(np.abs(uv) - 1.0) > 1e-9):
            raise ValueError("spectral values must have modulus 1")
        seed = None
    else:
        if rng is None:
            raise ValueError("abridged_f_circulant needs rng or explicit u")
        seed, stream = _spawn(rng)
        uv = stream.unit_modulus(n)
    if fz == 1.0:
        dfvec = None
    else:
        phi = np.angle(fz)
        dfvec = np.exp(1j * phi * np.arange(n) / n)
    params = {"d": d, "f": _jsonify_scalar(fz if fz.imag else fz.real)}
    if seed is None:
        params["u"] = [_jsonify_scalar(z) for z in uv]
    child = abridged_fourier(n, d)
    return Multiplier("abridged_f_circulant", (n, n), "complex", params, seed,
                      [child], {"u": uv, "dfvec": dfvec})


def inverse_bidiagonal(n: int, rng=None, diag_entries=None,
                       orientation: str = "lower", main=1.0,
                       offset: int = 1, band_value=None) -> Multiplier:
    """Inverse of a bidiagonal matrix, applied by banded substitution.

    The forward matrix has ``main`` on the diagonal and a filled k-th
    sub- or superdiagonal (k = offset): random +-1 entries when rng is
    given, the constant ``band_value`` or explicit ``diag_entries``
    otherwise.  One apply solves the bidiagonal system: n-1 additions in
    the real +-1 case, 2n-1 operations in general.  The densified
    operator with unit entries has condition number at most sqrt(2n).

    Sampling order: the n-offset band entries.
    """
    if orientation not in ("lower", "upper"):
        raise ValueError(f"orientation must be 'lower' or 'upper', got {orientation!r}")
    if not 1 <= offset < n:
        raise ValueError(f"band offset {offset} out of range 1..{n - 1}")
    m = n - offset
    if diag_entries is not None:
        band = np.asarray(diag_entries)
        if band.shape != (m,):
            raise ValueError(f"expected {m} band entries for offset {offset}")
        seed = None
    elif band_value is not None:
        band = np.full(m, float(band_value))
        seed = None
    else:
        if rng is None:
            raise ValueError("inverse_bidiagonal needs rng, band_value, or diag_entries")
        seed, stream = _spawn(rng)
        band = stream.signs(m)
    main_z = complex(main)
    main_val = main_z if main_z.imag != 0.0 else main_z.real
    field = "complex" if (np.iscomplexobj(band) or main_z.imag != 0.0) else "real"
    params = {"orientation": orientation, "offset": offset,
              "main": _jsonify_scalar(main_val)}
    if seed is None:
        params["band"] = [_jsonify_scalar(z) for z in band]
    free = _is_free_values(band) if band.size else True
    return Multiplier("inverse_bidiagonal", (n, n), field, params, seed, [],
                      {"band": band, "main": main_val, "band_free": free,
                       "free": free and abs(abs(main_z) - 1.0) < _UNIT_TOL})


def givens_chain(n: int, d_fourier: int, rng=None, thetas=None,
                 identity_pd: bool = False) -> Multiplier:
    """Scaled chain of rotation sweeps around a Fourier factor:
    (1/s) D1 G1 D2 G2 D3 W, s = 2^{d_fourier/2}, where each G is a random
    permutation followed by n-1 adjacent-plane rotations and each D is a
    random sign diagonal.  Unitary to working precision.

    Explicit thetas (a pair of length n-1 arrays, requires
    identity_pd=True) pin the randomness for the degenerate tests.
    Sampling order: first sweep's angles, second sweep's angles, three
    sign diagonals, two permutations.
    """
    _check_depth(n, d_fourier)
    if thetas is not None:
        if not identity_pd:
            raise ValueError("explicit angles require identity_pd=True")
        th1 = np.asarray(thetas[0], dtype=float)
        th2 = np.asarray(thetas[1], dtype=float)
        if th1.shape != (n - 1,) or th2.shape != (n - 1,):
            raise ValueError(f"expected two angle arrays of length {n - 1}")
        seed = None
    else:
        if rng is None:
            raise ValueError("givens_chain needs rng or explicit thetas")
        seed, stream = _spawn(rng)
        th1 = stream.uniform(0.0, 2.0 * np.pi, size=n - 1)
        th2 = stream.uniform(0.0, 2.0 * np.pi, size=n - 1)
    if identity_pd:
        d1 = d2 = d3 = np.ones(n)
        p1 = p2 = np.arange(n, dtype=np.intp)
    else:
        d1, d2, d3 = stream.signs(n), stream.signs(n), stream.signs(n)
        p1, p2 = (stream.permutation(n).astype(np.intp),
                  stream.permutation(n).astype(np.intp))
    params = {"d_fourier": d_fourier, "identity_pd": bool(identity_pd)}
    if seed is None:
        params["theta1"] = th1.tolist()
        params["theta2"] = th2.tolist()
    child = abridged_fourier(n, d_fourier)
    data = {"cos1": np.cos(th1), "sin1": np.sin(th1),
            "cos2": np.cos(th2), "sin2": np.sin(th2),
            "d1": d1, "d2": d2, "d3": d3, "p1": p1, "p2": p2,
            "scale": 2.0 ** (d_fourier / 2.0)}
    return Multiplier("givens_chain", (n, n), "complex", params, seed, [child], data)


# ---------------------------------------------------------------------------
# dense reference families


def dense_multiplier(entries: np.ndarray, source: str = "explicit",
                     seed=None, free_values: bool = False) -> Multiplier:
    """Wrap an explicit matrix; the tally uses the dense product model.

    Explicit entries are serialized only when a descriptor is requested.
    """
    A = np.asarray(entries)
    if A.ndim != 2:
        raise ValueError("dense multiplier needs a 2-d matrix")
    field = "complex" if np.iscomplexobj(A) else "real"
    return Multiplier("dense", A.shape, field, {"source": source}, seed, [],
                      {"matrix": A, "free": free_values})


def dense_gaussian(n_rows: int, n_cols: int, rng) -> Multiplier:
    """Dense i.i.d. Gaussian reference multiplier, (2n-1)*n flops/apply."""
    seed, stream = _spawn(rng)
    A = stream.normal((n_rows, n_cols))
    return dense_multiplier(A, source="gaussian", seed=seed)


def dense_pm1_0(n_rows: int, n_cols: int, rng) -> Multiplier:
    """Dense matrix of i.i.d. entries from {-1, 0, +1}, each with
    probability 1/3; multiplications are sign flips, so only additions
    count."""
    seed, stream = _spawn(rng)
    A = stream.integers(0, 3, size=(n_rows, n_cols)) - 1.0
    return dense_multiplier(A, source="pm1_0", seed=seed, free_values=True)


def gaussian_toeplitz(n: int, rng) -> Multiplier:
    """Toeplitz multiplier defined by 2n-1 i.i.d. Gaussian parameters.

    Sampling order: one length 2n-1 vector; entry k is the diagonal
    starting at offset k - (n-1).
    """
    seed, stream = _spawn(rng)
    v = stream.normal(2 * n - 1)
    # v[n-1] is the main diagonal; first column v[n-1:], first row reversed head
    A = scipy.linalg.toeplitz(v[n - 1:], v[n - 1::-1])
    node = dense_multiplier(A, source="toeplitz", seed=seed)
    node.params["order"] = n
    return node


# ---------------------------------------------------------------------------
# combinators


def multiplier_sum(blocks, coeffs=None, rng=None) -> Multiplier:
    """Linear combination sum_j c_j B_j of same-shape operators.

    Default coefficients are all +1; an rng samples signs instead.
    Heuristic recombination of failed sketching blocks uses |c_j| = 1.
    """
    blocks = list(blocks)
    if not blocks:
        raise ValueError("sum of zero operators")
    shape = blocks[0].shape
    for b in blocks[1:]:
        if b.shape != shape:
            raise ValueError(f"summand shape mismatch: {b.shape} vs {shape}")
    seed = None
    if coeffs is None:
        if rng is not None:
            seed, stream = _spawn(rng)
            coeffs = stream.signs(len(blocks))
        else:
            coeffs = np.ones(len(blocks))
    coeffs = np.asarray(coeffs)
    if coeffs.shape != (len(blocks),):
        raise ValueError("need one coefficient per summand")
    field = "complex" if (np.iscomplexobj(coeffs) or
                          any(b.field == "complex" for b in blocks)) else "real"
    return Multiplier("sum", shape, field,
                      {"coeffs": [_jsonify_scalar(z) for z in coeffs]},
                      seed, blocks, {"coeffs": coeffs,
                                     "free": _is_free_values(coeffs)})


def multiplier_product(blocks) -> Multiplier:
    """Operator product B_1 B_2 ... B_k (applied right to left)."""
    blocks = list(blocks)
    if not blocks:
        raise ValueError("product of zero operators")
    for left, right in zip(blocks, blocks[1:]):
        if left.n_cols != right.n_rows:
            raise ValueError(f"product shape mismatch: {left.shape} then {right.shape}")
    field = "complex" if any(b.field == "complex" for b in blocks) else "real"
    return Multiplier("product", (blocks[0].n_rows, blocks[-1].n_cols), field,
                      {}, None, blocks, {})


def block2x2_circulant(n: int, rng) -> Multiplier:
    """Order-2n operator (1/sqrt n) [[C_u, C_v], [C_v, -C_u]] D for
    circulants generated by random sign vectors u, v and a random sign
    diagonal D of order 2n.

    Sampling order: u, then v, then the 2n diagonal signs.
    """
    seed, stream = _spawn(rng)
    u = stream.signs(n)
    v = stream.signs(n)
    dsigns = stream.signs(2 * n)
    Cu = scipy.linalg.circulant(u)
    Cv = scipy.linalg.circulant(v)
    return Multiplier("block2x2_circulant", (2 * n, 2 * n), "real",
                      {"half_order": n}, seed, [],
                      {"Cu": Cu, "Cv": Cv, "dsigns": dsigns,
                       "scale": 1.0 / np.sqrt(n)})


def restrict_columns(B: Multiplier, cols) -> Multiplier:
    """Column restriction B[:, cols]; an int takes the leftmost columns."""
    idx = np.arange(cols, dtype=np.intp) if isinstance(cols, (int, np.integer)) \
        else np.asarray(cols, dtype=np.intp)
    if idx.size == 0 or idx.min() < 0 or idx.max() >= B.n_cols or len(np.unique(idx)) != idx.size:
        raise ValueError("restriction columns must be distinct and in range")
    return Multiplier("restrict", (B.n_rows, idx.size), B.field,
                      {"axis": "cols", "indices": idx.tolist()}, None, [B],
                      {"indices": idx})


def restrict_rows(B: Multiplier, rows) -> Multiplier:
    """Row restriction B[rows, :]; an int takes the topmost rows."""
    idx = np.arange(rows, dtype=np.intp) if isinstance(rows, (int, np.integer)) \
        else np.asarray(rows, dtype=np.intp)
    if idx.size == 0 or idx.min() < 0 or idx.max() >= B.n_rows or len(np.unique(idx)) != idx.size:
        raise ValueError("restriction rows must be distinct and in range")
    return Multiplier("restrict", (idx.size, B.n_cols), B.field,
                      {"axis": "rows", "indices": idx.tolist()}, None, [B],
                      {"indices": idx})


def scale(B: Multiplier, factor) -> Multiplier:
    fz = complex(factor)
    field = "complex" if fz.imag != 0.0 else B.field
    fval = fz if fz.imag != 0.0 else fz.real
    return Multiplier("scale", B.shape, field,
                      {"factor": _jsonify_scalar(fval)}, None, [B],
                      {"factor": fval,
                       "free": fval in (1.0, -1.0)})


# ---------------------------------------------------------------------------
# composed standard variants: scaling and/or permutation around a transform


def _variant(core: Multiplier, n: int, rng, scaled: bool, permuted: bool,
             field: str, scale_set=None) -> Multiplier:
    parts = []
    stream = as_stream(rng)
    if permuted:
        parts.append(permutation(n, stream))
    if scaled:
        if scale_set is not None:
            parts.append(diagonal(n, rng=stream, value_set=scale_set))
        else:
            parts.append(unit_diagonal(n, stream, field=field))
    parts.append(core)
    return multiplier_product(parts) if len(parts) > 1 else core


def ash(n, d, rng, field="real", scale_set=None):
    """Scaled abridged Hadamard: D H."""
    return _variant(abridged_hadamard(n, d), n, rng, True, False, field, scale_set)


def aph(n, d, rng):
    """Permuted abridged Hadamard: P H."""
    return _variant(abridged_hadamard(n, d), n, rng, False, True, "real")


def asph(n, d, rng, field="real", scale_set=None):
    """Scaled and permuted abridged Hadamard: P D H."""
    return _variant(abridged_hadamard(n, d), n, rng, True, True, field, scale_set)


def asf(n, d, rng):
    return _variant(abridged_fourier(n, d), n, rng, True, False, "complex")


def apf(n, d, rng):
    return _variant(abridged_fourier(n, d), n, rng, False, True, "complex")


def aspf(n, d, rng):
    return _variant(abridged_fourier(n, d), n, rng, True, True, "complex")


def column_permuted(core: Multiplier, rng) -> Multiplier:
    """Transform followed by a random column permutation (core P), so a
    leftmost restriction picks random columns of the transform."""
    return multiplier_product([core, permutation(core.n_cols, rng)])


# ---------------------------------------------------------------------------
# apply kernels
#
# Each kernel takes (node, X, tally) with X of shape (n_cols, k) and
# returns the (n_rows, k) product, counting field ops for the k columns.


def _tick(tally, adds=0, muls=0):
    if tally is not None and (adds or muls):
        tally.count(adds, muls)


def _k_perm_apply(node, X, tally):
    out = np.empty_like(X)
    out[node.data["perm"]] = X
    return out


def _k_perm_transpose(node, X, tally):
    return X[node.data["perm"]].copy()


def _k_diag_apply(node, X, tally):
    e = node.data["entries"]
    if not node.data["free"]:
        _tick(tally, muls=e.size * X.shape[1])
    return e[:, None] * X


def _k_diag_adjoint(node, X, tally):
    e = node.data["entries"]
    if not node.data["free"]:
        _tick(tally, muls=e.size * X.shape[1])
    return np.conj(e)[:, None] * X


def _k_shift_apply(node, X, tally):
    f = node.data["f"]
    out = np.empty(X.shape, dtype=np.result_type(X.dtype, type(f)))
    out[1:] = X[:-1]
    out[0] = f * X[-1]
    if f not in (0.0, 1.0, -1.0):
        _tick(tally, muls=X.shape[1])
    return out


def _k_shift_transpose(node, X, tally):
    f = node.data["f"]
    out = np.empty(X.shape, dtype=np.result_type(X.dtype, type(f)))
    out[:-1] = X[1:]
    out[-1] = f * X[0]
    if f not in (0.0, 1.0, -1.0):
        _tick(tally, muls=X.shape[1])
    return out


def _k_hprim_apply(node, X, tally):
    s = node.n_rows // 2
    top, bot = X[:s], X[s:]
    _tick(tally, adds=node.n_rows * X.shape[1])
    return np.concatenate([top + bot, top - bot], axis=0)


def _k_ah_apply(node, X, tally):
    n, k = node.n_rows, X.shape[1]
    d = node.params["d"]
    Y = np.array(X, copy=True)
    for lev in range(d):
        b = n >> lev
        h = b >> 1
        V = Y.reshape(-1, b, k)
        top = V[:, :h].copy()
        bot = V[:, h:]
        V[:, :h] = top + bot
        V[:, h:] = top - bot
    _tick(tally, adds=d * n * k)
    return Y


def _af_forward(X, twiddles, d, lev, tally):
    if lev == d:
        return X
    b = X.shape[0]
    h = b // 2
    top, bot = X[:h], X[h:]
    u = top + bot
    v = (top - bot) * twiddles[lev][:, None]
    _tick(tally, adds=b * X.shape[1], muls=h * X.shape[1])
    a = _af_forward(u, twiddles, d, lev + 1, tally)
    c = _af_forward(v, twiddles, d, lev + 1, tally)
    out = np.empty((b, X.shape[1]), dtype=np.result_type(a.dtype, c.dtype))
    out[0::2] = a
    out[1::2] = c
    return out


def _af_transpose(Y, twiddles, d, lev, tally):
    if lev == d:
        return Y
    b = Y.shape[0]
    h = b // 2
    a = _af_transpose(np.ascontiguousarray(Y[0::2]), twiddles, d, lev + 1, tally)
    c = _af_transpose(np.ascontiguousarray(Y[1::2]), twiddles, d, lev + 1, tally) \
        * twiddles[lev][:, None]
    _tick(tally, adds=b * Y.shape[1], muls=h * Y.shape[1])
    return np.concatenate([a + c, a - c], axis=0)


def _k_af_apply(node, X, tally):
    Xc = X.astype(complex, copy=False)
    return _af_forward(Xc, node.data["twiddles"], node.params["d"], 0, tally)


def _k_af_transpose(node, X, tally):
    Xc = X.astype(complex, copy=False)
    return _af_transpose(Xc, node.data["twiddles"], node.params["d"], 0, tally)


def _rand_abridged_apply(node, X, lev, blk, tally):
    d = node.params["d"]
    kind = node.params["kind"]
    b = X.shape[0]
    h = b // 2
    k = X.shape[1]
    top, bot = X[:h], X[h:]
    u = top + bot
    v = top - bot
    _tick(tally, adds=b * k)
    if kind == "F":
        v = v * node.data["twiddles"][lev][:, None]
        _tick(tally, muls=h * k)
    if lev + 1 < d:
        u = _rand_abridged_apply(node, u, lev + 1, 2 * blk, tally)
        v = _rand_abridged_apply(node, v, lev + 1, 2 * blk + 1, tally)
    Y = np.concatenate([u, v], axis=0)
    dvec = node.data["diags"][lev][blk]
    Y = Y * dvec[:, None]
    if kind == "F":
        _tick(tally, muls=b * k)
    out = np.empty_like(Y)
    out[node.data["perms"][lev][blk]] = Y
    return out


def _k_rand_abridged_apply(node, X, tally):
    if node.params["kind"] == "F":
        X = X.astype(complex, copy=False)
    return _rand_abridged_apply(node, X, 0, 0, tally)


def _rand_abridged_transpose(node, Y, lev, blk, tally):
    d = node.params["d"]
    kind = node.params["kind"]
    b = Y.shape[0]
    h = b // 2
    k = Y.shape[1]
    Z = Y[node.data["perms"][lev][blk]]
    Z = Z * node.data["diags"][lev][blk][:, None]
    if kind == "F":
        _tick(tally, muls=b * k)
    u, v = Z[:h], Z[h:]
    if lev + 1 < d:
        u = _rand_abridged_transpose(node, u, lev + 1, 2 * blk, tally)
        v = _rand_abridged_transpose(node, v, lev + 1, 2 * blk + 1, tally)
    if kind == "F":
        v = v * node.data["twiddles"][lev][:, None]
        _tick(tally, muls=h * k)
    _tick(tally, adds=b * k)
    return np.concatenate([u + v, u - v], axis=0)


def _k_rand_abridged_transpose(node, Y, tally):
    if node.params["kind"] == "F":
        Y = Y.astype(complex, copy=False)
    return _rand_abridged_transpose(node, Y, 0, 0, tally)


def _circulant_tick(node, k, tally):
    q = node.params["q"]
    n = node.n_rows
    if node.data["free"]:
        _tick(tally, adds=(q - 1) * n * k)
    else:
        _tick(tally, adds=(q - 1) * n * k, muls=q * n * k)


def _circulant_dense(node):
    C = node.data.get("_dense")
    if C is None:
        n = node.n_rows
        f = node.data["f"]
        col = np.zeros(n, dtype=complex if node.field == "complex" else float)
        col[node.data["positions"]] = node.data["values"]
        C = scipy.linalg.circulant(col)
        if f != 1.0:
            # entries above the diagonal carry the wrap factor f
            C = np.where(np.subtract.outer(np.arange(n), np.arange(n)) < 0, C * f, C)
        node.data["_dense"] = C
    return C


def _k_circulant_apply(node, X, tally):
    _circulant_tick(node, X.shape[1], tally)
    q = node.params["q"]
    if q > _SHIFT_SUM_MAX_Q:
        return _circulant_dense(node) @ X
    f = node.data["f"]
    dtype = np.result_type(X.dtype, node.data["values"].dtype,
                           type(f) if f != 1.0 else float)
    out = np.zeros(X.shape, dtype=dtype)
    for p, v in zip(node.data["positions"], node.data["values"]):
        if p == 0:
            out += v * X
            continue
        rolled = np.roll(X, p, axis=0).astype(dtype, copy=False)
        if f != 1.0:
            rolled[:p] = rolled[:p] * f
        out += v * rolled
    return out


def _k_circulant_transpose(node, X, tally):
    _circulant_tick(node, X.shape[1], tally)
    q = node.params["q"]
    if q > _SHIFT_SUM_MAX_Q:
        return _circulant_dense(node).T @ X
    f = node.data["f"]
    n = node.n_rows
    dtype = np.result_type(X.dtype, node.data["values"].dtype,
                           type(f) if f != 1.0 else float)
    out = np.zeros(X.shape, dtype=dtype)
    for p, v in zip(node.data["positions"], node.data["values"]):
        if p == 0:
            out += v * X
            continue
        rolled = np.roll(X, -p, axis=0).astype(dtype, copy=False)
        if f != 1.0:
            rolled[n - p:] = rolled[n - p:] * f
        out += v * rolled
    return out


def _k_unif_sparse_apply(node, X, tally):
    out = np.zeros_like(X)
    for perm, sg in zip(node.data["perms"], node.data["signs"]):
        out[perm] += sg[perm, None] * X
    _tick(tally, adds=(node.params["q"] - 1) * node.n_rows * X.shape[1])
    return out


def _k_unif_sparse_transpose(node, X, tally):
    out = np.zeros_like(X)
    for perm, sg in zip(node.data["perms"], node.data["signs"]):
        out += (sg[:, None] * X)[perm]
    _tick(tally, adds=(node.params["q"] - 1) * node.n_rows * X.shape[1])
    return out


def _abridged_fcirc_core(node, X, u, tally):
    n, k = node.n_rows, X.shape[1]
    af = node.children[0]
    dfvec = node.data["dfvec"]
    Y = X.astype(complex, copy=False)
    if dfvec is not None:
        Y = dfvec[:, None] * Y
        _tick(tally, muls=n * k)
    Y = af.apply(Y, tally)
    Y = u[:, None] * Y
    _tick(tally, muls=n * k)
    Y = af.apply_adjoint(Y, tally)
    if dfvec is not None:
        Y = np.conj(dfvec)[:, None] * Y
        _tick(tally, muls=n * k)
    return Y


def _k_abridged_fcirc_apply(node, X, tally):
    return _abridged_fcirc_core(node, X, node.data["u"], tally)


def _k_abridged_fcirc_adjoint(node, X, tally):
    return _abridged_fcirc_core(node, X, np.conj(node.data["u"]), tally)


def _bidiag_ab(node, transpose: bool):
    n = node.n_rows
    offset = node.params["offset"]
    main = node.data["main"]
    band = node.data["band"]
    lower = (node.params["orientation"] == "lower") != transpose
    dtype = complex if node.field == "complex" else float
    if lower:
        ab = np.zeros((offset + 1, n), dtype=dtype)
        ab[0] = main
        ab[offset, :n - offset] = band
        return (offset, 0), ab
    ab = np.zeros((offset + 1, n), dtype=dtype)
    ab[offset] = main
    ab[0, offset:] = band
    return (0, offset), ab


def _bidiag_tick(node, k, tally):
    n = node.n_rows
    offset = node.params["offset"]
    muls = 0
    if not node.data["band_free"]:
        muls += n - offset
    if node.data["main"] not in (1.0, -1.0):
        muls += n  # diagonal divisions; a +-1 main is only a sign flip
    _tick(tally, adds=(n - offset) * k, muls=muls * k)


def _k_bidiag_apply(node, X, tally):
    _bidiag_tick(node, X.shape[1], tally)
    lu, ab = _bidiag_ab(node, transpose=False)
    return scipy.linalg.solve_banded(lu, ab, X)


def _k_bidiag_transpose(node, X, tally):
    _bidiag_tick(node, X.shape[1], tally)
    lu, ab = _bidiag_ab(node, transpose=True)
    return scipy.linalg.solve_banded(lu, ab, X)


def _rotation_sweep(Y, cos, sin, forward: bool, tally):
    n = Y.shape[0]
    k = Y.shape[1]
    if forward:
        order = range(n - 2, -1, -1)
    else:
        order = range(n - 1)
    for i in order:
        c, s = cos[i], sin[i]
        a = Y[i].copy()
        b = Y[i + 1]
        if forward:
            Y[i] = c * a - s * b
            Y[i + 1] = s * a + c * b
        else:
            Y[i] = c * a + s * b
            Y[i + 1] = c * b - s * a
    _tick(tally, adds=2 * (n - 1) * k, muls=4 * (n - 1) * k)
    return Y


def _k_givens_apply(node, X, tally):
    dat = node.data
    k = X.shape[1]
    n = node.n_rows
    Y = node.children[0].apply(X.astype(complex, copy=False), tally)
    Y = Y * dat["d3"][:, None]
    Y = _rotation_sweep(Y, dat["cos2"], dat["sin2"], True, tally)
    out = np.empty_like(Y)
    out[dat["p2"]] = Y
    Y = out * dat["d2"][:, None]
    Y = _rotation_sweep(Y, dat["cos1"], dat["sin1"], True, tally)
    out = np.empty_like(Y)
    out[dat["p1"]] = Y
    Y = out * dat["d1"][:, None]
    _tick(tally, muls=n * k)
    return Y / dat["scale"]


def _k_givens_transpose(node, X, tally):
    dat = node.data
    k = X.shape[1]
    n = node.n_rows
    Y = X.astype(complex, copy=True)
    Y = Y * dat["d1"][:, None]
    Y = Y[dat["p1"]]
    Y = _rotation_sweep(Y, dat["cos1"], dat["sin1"], False, tally)
    Y = Y * dat["d2"][:, None]
    Y = Y[dat["p2"]]
    Y = _rotation_sweep(Y, dat["cos2"], dat["sin2"], False, tally)
    Y = Y * dat["d3"][:, None]
    Y = node.children[0].apply_transpose(Y, tally)
    _tick(tally, muls=n * k)
    return Y / dat["scale"]


def _k_dense_apply(node, X, tally):
    A = node.data["matrix"]
    m, n = A.shape
    if node.data["free"]:
        _tick(tally, adds=(n - 1) * m * X.shape[1])
    else:
        _tick(tally, adds=(n - 1) * m * X.shape[1], muls=n * m * X.shape[1])
    return A @ X


def _k_dense_transpose(node, X, tally):
    A = node.data["matrix"]
    m, n = A.shape
    if node.data["free"]:
        _tick(tally, adds=(m - 1) * n * X.shape[1])
    else:
        _tick(tally, adds=(m - 1) * n * X.shape[1], muls=n * m * X.shape[1])
    return A.T @ X


def _k_sum_apply(node, X, tally):
    coeffs = node.data["coeffs"]
    free = node.data["free"]
    acc = None
    for c, child in zip(coeffs, node.children):
        term = child.apply(X, tally)
        if not free:
            _tick(tally, muls=node.n_rows * X.shape[1])
        term = c * term
        acc = term if acc is None else acc + term
    _tick(tally, adds=(len(node.children) - 1) * node.n_rows * X.shape[1])
    return acc


def _k_sum_transpose(node, X, tally):
    coeffs = node.data["coeffs"]
    free = node.data["free"]
    acc = None
    for c, child in zip(coeffs, node.children):
        term = child.apply_transpose(X, tally)
        if not free:
            _tick(tally, muls=node.n_cols * X.shape[1])
        term = c * term
        acc = term if acc is None else acc + term
    _tick(tally, adds=(len(node.children) - 1) * node.n_cols * X.shape[1])
    return acc


def _k_product_apply(node, X, tally):
    Y = X
    for child in reversed(node.children):
        Y = child.apply(Y, tally)
    return Y


def _k_product_transpose(node, X, tally):
    Y = X
    for child in node.children:
        Y = child.apply_transpose(Y, tally)
    return Y


def _k_block2_apply(node, X, tally):
    dat = node.data
    n = node.params["half_order"]
    k = X.shape[1]
    Y = dat["dsigns"][:, None] * X
    top, bot = Y[:n], Y[n:]
    out_top = dat["Cu"] @ top + dat["Cv"] @ bot
    out_bot = dat["Cv"] @ top - dat["Cu"] @ bot
    # dense circulant product model: 4 blocks of (2n-1)*n, plus combine
    _tick(tally, adds=(4 * (n - 1) * n + 2 * n) * k, muls=(4 * n * n + 2 * n) * k)
    return np.concatenate([out_top, out_bot], axis=0) * dat["scale"]


def _k_block2_transpose(node, X, tally):
    dat = node.data
    n = node.params["half_order"]
    k = X.shape[1]
    top, bot = X[:n], X[n:]
    out_top = dat["Cu"].T @ top + dat["Cv"].T @ bot
    out_bot = dat["Cv"].T @ top - dat["Cu"].T @ bot
    Y = np.concatenate([out_top, out_bot], axis=0) * dat["scale"]
    _tick(tally, adds=(4 * (n - 1) * n + 2 * n) * k, muls=(4 * n * n + 2 * n) * k)
    return dat["dsigns"][:, None] * Y


def _k_restrict_apply(node, X, tally):
    child = node.children[0]
    idx = node.data["indices"]
    if node.params["axis"] == "cols":
        full = np.zeros((child.n_cols, X.shape[1]), dtype=X.dtype)
        full[idx] = X
        return child.apply(full, tally)
    return child.apply(X, tally)[idx]


def _k_restrict_transpose(node, X, tally):
    child = node.children[0]
    idx = node.data["indices"]
    if node.params["axis"] == "cols":
        return child.apply_transpose(X, tally)[idx]
    full = np.zeros((child.n_rows, X.shape[1]), dtype=X.dtype)
    full[idx] = X
    return child.apply_transpose(full, tally)


def _k_scale_apply(node, X, tally):
    out = node.data["factor"] * node.children[0].apply(X, tally)
    if not node.data["free"]:
        _tick(tally, muls=node.n_rows * X.shape[1])
    return out


def _k_scale_transpose(node, X, tally):
    out = node.data["factor"] * node.children[0].apply_transpose(X, tally)
    if not node.data["free"]:
        _tick(tally, muls=node.n_cols * X.shape[1])
    return out


_APPLY = {
    "permutation": _k_perm_apply,
    "diagonal": _k_diag_apply,
    "shift": _k_shift_apply,
    "hadamard_primitive": _k_hprim_apply,
    "abridged_hadamard": _k_ah_apply,
    "abridged_fourier": _k_af_apply,
    "randomized_abridged": _k_rand_abridged_apply,
    "sparse_f_circulant": _k_circulant_apply,
    "uniformly_sparse": _k_unif_sparse_apply,
    "abridged_f_circulant": _k_abridged_fcirc_apply,
    "inverse_bidiagonal": _k_bidiag_apply,
    "givens_chain": _k_givens_apply,
    "dense": _k_dense_apply,
    "sum": _k_sum_apply,
    "product": _k_product_apply,
    "block2x2_circulant": _k_block2_apply,
    "restrict": _k_restrict_apply,
    "scale": _k_scale_apply,
}

_TRANSPOSE = {
    "permutation": _k_perm_transpose,
    "shift": _k_shift_transpose,
    "hadamard_primitive": _k_hprim_apply,     # symmetric
    "abridged_hadamard": _k_ah_apply,         # symmetric
    "abridged_fourier": _k_af_transpose,
    "randomized_abridged": _k_rand_abridged_transpose,
    "sparse_f_circulant": _k_circulant_transpose,
    "uniformly_sparse": _k_unif_sparse_transpose,
    "inverse_bidiagonal": _k_bidiag_transpose,
    "givens_chain": _k_givens_transpose,
    "dense": _k_dense_transpose,
    "sum": _k_sum_transpose,
    "product": _k_product_transpose,
    "block2x2_circulant": _k_block2_transpose,
    "restrict": _k_restrict_transpose,
    "scale": _k_scale_transpose,
}


def _k_diag_transpose(node, X, tally):
    return _k_diag_apply(node, X, tally)


_TRANSPOSE["diagonal"] = _k_diag_transpose

_ADJOINT = {
    "diagonal": _k_diag_adjoint,
    "abridged_f_circulant": _k_abridged_fcirc_adjoint,
}


# ---------------------------------------------------------------------------
# random-variable budgets (descriptor seed consumption per family)


_RV_COUNT = {
    "permutation": lambda node: node.n_rows if node.seed is not None else 0,
    "diagonal": lambda node: node.n_rows if node.seed is not None else 0,
    "randomized_abridged": lambda node: (
        0 if node.params["identity_pd"] or node.seed is None
        else 2 * node.params["d"] * node.n_rows),
    "sparse_f_circulant": lambda node: 2 * node.params["q"] if node.seed is not None else 0,
    "uniformly_sparse": lambda node: 2 * node.params["q"] * node.n_rows if node.seed is not None else 0,
    "abridged_f_circulant": lambda node: node.n_rows if node.seed is not None else 0,
    "inverse_bidiagonal": lambda node: (
        node.n_rows - node.params["offset"] if node.seed is not None else 0),
    "givens_chain": lambda node: (
        (2 * (node.n_rows - 1) + 5 * node.n_rows) if node.seed is not None else 0),
    "dense": lambda node: (
        node.n_rows * node.n_cols if node.seed is not None and node.params["source"] in ("gaussian", "pm1_0")
        else (2 * node.params.get("order", 0) - 1 if node.seed is not None and node.params["source"] == "toeplitz" else 0)),
    "block2x2_circulant": lambda node: 2 * node.n_rows if node.seed is not None else 0,
    "sum": lambda node: len(node.children) if node.seed is not None else 0,
}


_UNITARY_CONSTANT = {
    "permutation": lambda node: 1.0,
    "shift": lambda node: 1.0 if node.data["f"] != 0.0 else None,
    "hadamard_primitive": lambda node: 2.0,
    "abridged_hadamard": lambda node: float(2 ** node.params["d"]),
    "abridged_fourier": lambda node: float(2 ** node.params["d"]),
    "randomized_abridged": lambda node: float(2 ** node.params["d"]),
    "abridged_f_circulant": lambda node: float(4 ** node.params["d"]),
    "givens_chain": lambda node: 1.0,
}


def _diag_unitary(node):
    return 1.0 if _is_free_values(node.data["entries"]) or \
        bool(np.all(np.abs(np.abs(node.data["entries"]) - 1.0) <= _UNIT_TOL)) else None


def _scale_unitary(node):
    c = node.children[0].unitary_constant()
    return None if c is None else c * abs(node.data["factor"]) ** 2


def _product_unitary(node):
    c = 1.0
    for child in node.children:
        cc = child.unitary_constant()
        if cc is None:
            return None
        c *= cc
    return c


_UNITARY_CONSTANT["diagonal"] = _diag_unitary
_UNITARY_CONSTANT["scale"] = _scale_unitary
_UNITARY_CONSTANT["product"] = _product_unitary
_UNITARY_CONSTANT["restrict"] = lambda node: node.children[0].unitary_constant()


# ---------------------------------------------------------------------------
# descriptor reconstruction


def from_descriptor(desc: dict) -> Multiplier:
    """Rebuild an operator tree from its JSON descriptor, bit-identically."""
    family = desc["family"]
    n_rows, n_cols = desc["shape"]
    params = desc.get("params", {})
    seed = desc.get("seed")
    children = [from_descriptor(c) for c in desc.get("children", [])]
    builder = _REBUILD.get(family)
    if builder is None:
        raise ValueError(f"unknown multiplier family {family!r}")
    return builder(n_rows, n_cols, params, seed, children)


def _rb_permutation(m, n, params, seed, children):
    if seed is None:
        return permutation(n, perm=np.asarray(params["perm"], dtype=np.intp))
    return permutation(n, rng=seed)


def _rb_diagonal(m, n, params, seed, children):
    if seed is None:
        entries = np.array([_unjsonify_scalar(v) for v in params["entries"]])
        if params.get("field_kind") == "real":
            entries = entries.real
        if "value_set" in params or not _is_unit(entries):
            return diagonal(n, entries=entries)
        return unit_diagonal(n, entries=entries)
    if "value_set" in params:
        return diagonal(n, rng=seed, value_set=params["value_set"])
    return unit_diagonal(n, rng=seed, field=params["field_kind"])


def _is_unit(entries) -> bool:
    return bool(np.all(np.abs(np.abs(entries) - 1.0) <= _UNIT_TOL))


def _rb_sparse_f_circulant(m, n, params, seed, children):
    f = _unjsonify_scalar(params["f"])
    if seed is None:
        values = np.array([_unjsonify_scalar(v) for v in params["values"]])
        return sparse_f_circulant(n, params["q"], f=f,
                                  positions=params["positions"], values=values,
                                  value_kind=params["value_kind"])
    return sparse_f_circulant(n, params["q"], f=f, rng=seed,
                              value_kind=params["value_kind"])


def _rb_abridged_f_circulant(m, n, params, seed, children):
    f = _unjsonify_scalar(params["f"])
    if seed is None:
        u = np.array([_unjsonify_scalar(v) for v in params["u"]], dtype=complex)
        return abridged_f_circulant(n, params["d"], f=f, u=u)
    return abridged_f_circulant(n, params["d"], f=f, rng=seed)


def _rb_inverse_bidiagonal(m, n, params, seed, children):
    main = _unjsonify_scalar(params["main"])
    if seed is None:
        band = np.array([_unjsonify_scalar(v) for v in params["band"]])
        if not np.iscomplexobj(band):
            band = band.real
        return inverse_bidiagonal(n, diag_entries=band,
                                  orientation=params["orientation"],
                                  main=main, offset=params["offset"])
    return inverse_bidiagonal(n, rng=seed, orientation=params["orientation"],
                              main=main, offset=params["offset"])


def _rb_givens(m, n, params, seed, children):
    if seed is None:
        return givens_chain(n, params["d_fourier"], rng=0,
                            thetas=(params["theta1"], params["theta2"]),
                            identity_pd=params["identity_pd"])
    return givens_chain(n, params["d_fourier"], rng=seed,
                        identity_pd=params["identity_pd"])


def _rb_dense(m, n, params, seed, children):
    source = params["source"]
    if source == "gaussian":
        return dense_gaussian(m, n, seed)
    if source == "pm1_0":
        return dense_pm1_0(m, n, seed)
    if source == "toeplitz":
        return gaussian_toeplitz(params["order"], seed)
    entries = np.array([[_unjsonify_scalar(v) for v in row]
                        for row in params["entries"]])
    if np.all(np.asarray(entries).imag == 0.0):
        entries = entries.real
    return dense_multiplier(entries, source=source)


def _rb_sum(m, n, params, seed, children):
    coeffs = np.array([_unjsonify_scalar(v) for v in params["coeffs"]])
    if not np.iscomplexobj(coeffs):
        coeffs = coeffs.real
    return multiplier_sum(children, coeffs=coeffs)


def _rb_restrict(m, n, params, seed, children):
    if params["axis"] == "cols":
        return restrict_columns(children[0], params["indices"])
    return restrict_rows(children[0], params["indices"])


_REBUILD = {
    "permutation": _rb_permutation,
    "diagonal": _rb_diagonal,
    "shift": lambda m, n, params, seed, children: shift(n, _unjsonify_scalar(params["f"])),
    "hadamard_primitive": lambda m, n, params, seed, children: hadamard_primitive(n),
    "abridged_hadamard": lambda m, n, params, seed, children: abridged_hadamard(n, params["d"]),
    "abridged_fourier": lambda m, n, params, seed, children: abridged_fourier(n, params["d"]),
    "randomized_abridged": lambda m, n, params, seed, children: randomized_abridged(
        n, params["d"], params["kind"], seed if seed is not None else 0,
        identity_pd=params["identity_pd"]),
    "sparse_f_circulant": _rb_sparse_f_circulant,
    "uniformly_sparse": lambda m, n, params, seed, children: uniformly_sparse(n, params["q"], seed),
    "abridged_f_circulant": _rb_abridged_f_circulant,
    "inverse_bidiagonal": _rb_inverse_bidiagonal,
    "givens_chain": _rb_givens,
    "dense": _rb_dense,
    "sum": _rb_sum,
    "product": lambda m, n, params, seed, children: multiplier_product(children),
    "block2x2_circulant": lambda m, n, params, seed, children: block2x2_circulant(
        params["half_order"], seed),
    "restrict": _rb_restrict,
    "scale": lambda m, n, params, seed, children: scale(
        children[0], _unjsonify_scalar(params["factor"])),
}


def densify(B: Multiplier, cap: int = DENSIFY_CAP) -> np.ndarray:
    return B.densify(cap)

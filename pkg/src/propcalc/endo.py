"""Endomorphism, mixed, and relative endomorphism constructions over colored
families of chain complexes.

An endo element of biarity (m, n) at profiles (d, c) and degree k is a family
of matrices Hom(X_c1 (x) ... (x) X_cn, X_d1 (x) ... (x) X_dm)_k.  Vertical
composition is plain composition (no sign), horizontal composition is the
Koszul tensor of maps, and permutations act through signed factor shuffles.
"""

from __future__ import annotations

from fractions import Fraction

from propcalc import linalg
from propcalc.chains import (
    ChainComplex,
    ChainError,
    ChainMap,
    TensorSpace,
    assemble_tensor_map,
    boundary_of_map,
    factor_permutation_map,
)
from propcalc.profiles import Palette, Permutation, Profile, apply_permutation, concat


class EndoError(ValueError):
    pass


class ColoredFamily:
    """Assignment of a chain complex to every color of a palette."""

    def __init__(self, palette: Palette, complexes):
        self.palette = palette
        self.complexes = dict(complexes)
        for c in palette.colors:
            if c not in self.complexes:
                raise EndoError("family misses color %r" % (c,))
        self._spaces = {}

    def complex_at(self, color) -> ChainComplex:
        return self.complexes[color]

    def space(self, profile: Profile) -> TensorSpace:
        key = profile.entries
        if key not in self._spaces:
            self._spaces[key] = TensorSpace([self.complexes[c] for c in key])
        return self._spaces[key]


class EndoElement:
    """Element of Hom(X_c, X_d)_k, stored as the underlying per-degree matrices."""

    __slots__ = ("family", "out_profile", "in_profile", "chain")

    def __init__(self, family, out_profile, in_profile, chain: ChainMap):
        self.family = family
        self.out_profile = out_profile
        self.in_profile = in_profile
        self.chain = chain

    @classmethod
    def from_mats(cls, family, out_profile, in_profile, degree, mats) -> "EndoElement":
        src = family.space(in_profile).complex
        tgt = family.space(out_profile).complex
        return cls(
            family, out_profile, in_profile, ChainMap(src, tgt, mats, degree, check=False)
        )

    @classmethod
    def zero(cls, family, out_profile, in_profile, degree=0) -> "EndoElement":
        return cls.from_mats(family, out_profile, in_profile, degree, {})

    @classmethod
    def identity(cls, family, profile) -> "EndoElement":
        space = family.space(profile).complex
        return cls(family, profile, profile, ChainMap.identity(space))

    @property
    def degree(self):
        return self.chain.degree

    def boundary(self) -> "EndoElement":
        return EndoElement(
            self.family, self.out_profile, self.in_profile, boundary_of_map(self.chain)
        )

    def add(self, other):
        self._same_shape(other)
        return EndoElement(self.family, self.out_profile, self.in_profile, self.chain.add(other.chain))

    def sub(self, other):
        self._same_shape(other)
        return EndoElement(self.family, self.out_profile, self.in_profile, self.chain.sub(other.chain))

    def scale(self, c):
        return EndoElement(self.family, self.out_profile, self.in_profile, self.chain.scale(c))

    def is_zero(self):
        return self.chain.is_zero()

    def _same_shape(self, other):
        if (
            self.out_profile != other.out_profile
            or self.in_profile != other.in_profile
            or self.degree != other.degree
        ):
            raise EndoError("endo element shape mismatch")

    def __eq__(self, other):
        if not isinstance(other, EndoElement):
            return NotImplemented
        return (
            self.out_profile == other.out_profile
            and self.in_profile == other.in_profile
            and self.chain == other.chain
        )

    def __repr__(self):
        return "EndoElement(%s <- %s, deg %d)" % (
            ",".join(map(str, self.out_profile.entries)),
            ",".join(map(str, self.in_profile.entries)),
            self.degree,
        )


def endo_component(family: ColoredFamily, out_profile, in_profile):
    """The internal hom complex Hom(X_c, X_d) truncated to degrees >= 0.

    Returns (complex, basis) where basis[k] lists (j, row, col) triples fixing
    the coordinate order, and the differential is D(f) = d f - (-1)^k f d.
    """
    src = family.space(in_profile).complex
    tgt = family.space(out_profile).complex
    top = (tgt.top_degree if not tgt.is_zero() else 0)
    dims = {}
    bases = {}
    for k in range(0, top + 1):
        basis = []
        for j in src.degrees():
            rows = tgt.dim(j + k)
            cols = src.dim(j)
            for r in range(rows):
                for c in range(cols):
                    basis.append((j, r, c))
        if basis:
            dims[k] = len(basis)
            bases[k] = basis
    boundary = {}
    for k in sorted(dims):
        if k == 0 or (k - 1) not in dims:
            continue
        cols = []
        index_lower = {trip: i for i, trip in enumerate(bases[k - 1])}
        for (j, r, c) in bases[k]:
            f = EndoElement.from_mats(
                family,
                out_profile,
                in_profile,
                k,
                {j: _unit_matrix(tgt.dim(j + k), src.dim(j), r, c)},
            )
            df = f.boundary().chain
            col = [Fraction(0)] * dims[k - 1]
            for j2 in df.mats:
                m = df.mats[j2]
                for r2 in range(len(m)):
                    for c2 in range(len(m[0])):
                        if m[r2][c2]:
                            col[index_lower[(j2, r2, c2)]] = m[r2][c2]
            cols.append(col)
        boundary[k] = [[cols[j][i] for j in range(dims[k])] for i in range(dims[k - 1])]
    return ChainComplex(dims, boundary), bases


def _unit_matrix(rows, cols, r, c):
    m = linalg.zeros(rows, cols)
    m[r][c] = Fraction(1)
    return m


def endo_vertical(f: EndoElement, g: EndoElement) -> EndoElement:
    """f o g; the middle profiles must agree as sequences."""
    if f.in_profile != g.out_profile:
        raise EndoError(
            "vertical middle mismatch: %r vs %r" % (f.in_profile, g.out_profile)
        )
    return EndoElement(f.family, f.out_profile, g.in_profile, f.chain.compose(g.chain))


def endo_horizontal(f: EndoElement, g: EndoElement) -> EndoElement:
    """f (x) g with the Koszul sign (-1)^{|g| |x|}."""
    if f.family is not g.family:
        raise EndoError("horizontal composition needs one family")
    fam = f.family
    out_p = concat(f.out_profile, g.out_profile)
    in_p = concat(f.in_profile, g.in_profile)
    src = fam.space(in_p)
    tgt = fam.space(out_p)
    chain = assemble_tensor_map(
        src,
        tgt,
        [
            (fam.space(f.in_profile), fam.space(f.out_profile), f.chain),
            (fam.space(g.in_profile), fam.space(g.out_profile), g.chain),
        ],
    )
    return EndoElement(fam, out_p, in_p, chain)


def _left_shuffle(family, profile, sigma) -> ChainMap:
    """X_profile -> X_{sigma profile}, factor i to slot sigma(i), Koszul signs."""
    factors = [family.complexes[c] for c in profile.entries]
    src = family.space(profile)
    tgt = family.space(apply_permutation(sigma, profile, "left"))
    return factor_permutation_map(factors, sigma, src_space=src, tgt_space=tgt)


def endo_permute(sigma: Permutation, tau: Permutation, f: EndoElement) -> EndoElement:
    """The bimodule structure map (sigma; tau): element at (d; c) to (sigma d; c tau)."""
    if sigma.n != len(f.out_profile) or tau.n != len(f.in_profile):
        raise EndoError("permutation lengths do not match the profiles")
    fam = f.family
    out_p = apply_permutation(sigma, f.out_profile, "left")
    in_p = apply_permutation(tau, f.in_profile, "right")
    l_sigma = _left_shuffle(fam, f.out_profile, sigma)
    # X_{c tau} -> X_c: source factor i carries color c_{tau(i)} and lands in slot tau(i)
    l_tau = factor_permutation_map(
        [fam.complexes[c] for c in in_p.entries],
        tau,
        src_space=fam.space(in_p),
        tgt_space=fam.space(f.in_profile),
    )
    chain = l_sigma.compose(f.chain).compose(l_tau)
    return EndoElement(fam, out_p, in_p, chain)


# ---------------------------------------------------------------------------
# families of maps, mixed and relative endomorphism constructions


class FamilyMap:
    """Color-indexed collection of degree-0 chain maps f_c: X_c -> Y_c."""

    def __init__(self, source: ColoredFamily, target: ColoredFamily, maps):
        self.source = source
        self.target = target
        self.maps = dict(maps)
        for c in source.palette.colors:
            if c not in self.maps:
                raise EndoError("family map misses color %r" % (c,))
            f = self.maps[c]
            if f.source.dims != source.complexes[c].dims or f.target.dims != target.complexes[c].dims:
                raise EndoError("family map at color %r has wrong shape" % (c,))
        self._profile_cache = {}

    @classmethod
    def identity(cls, family: ColoredFamily) -> "FamilyMap":
        return cls(
            family,
            family,
            {c: ChainMap.identity(family.complexes[c]) for c in family.palette.colors},
        )

    def profile_map(self, profile: Profile) -> ChainMap:
        """f_c1 (x) ... (x) f_cn on the flat tensor spaces (degree 0, no signs)."""
        key = profile.entries
        if key not in self._profile_cache:
            src = self.source.space(profile)
            tgt = self.target.space(profile)
            groups = []
            for c in key:
                groups.append(
                    (
                        TensorSpace([self.source.complexes[c]]),
                        TensorSpace([self.target.complexes[c]]),
                        self.maps[c],
                    )
                )
            self._profile_cache[key] = assemble_tensor_map(src, tgt, groups)
        return self._profile_cache[key]

    def classify(self):
        """Model-structure flags per color."""
        from propcalc.chains import classify_map

        return {c: classify_map(self.maps[c]) for c in self.source.palette.colors}


def mixed_component_dims(f: FamilyMap, out_profile, in_profile):
    """Dimensions of the mixed construction Hom(X_c, Y_d) per hom degree."""
    src = f.source.space(in_profile).complex
    tgt = f.target.space(out_profile).complex
    dims = {}
    top = tgt.top_degree if not tgt.is_zero() else 0
    for k in range(0, top + 1):
        d = sum(src.dim(j) * tgt.dim(j + k) for j in src.degrees())
        if d:
            dims[k] = d
    return dims


def relative_endo_membership(f: FamilyMap, phi_x: EndoElement, phi_y: EndoElement):
    """Does (phi_x, phi_y) lie in the relative construction E_f?

    Both push-forward f_* phi_x and pull-back f^* phi_y land in the mixed
    component Hom(X_c, Y_d); membership means they agree there.  Returns
    (bool, residual EndoElement-like ChainMap).
    """
    if phi_x.out_profile != phi_y.out_profile or phi_x.in_profile != phi_y.in_profile:
        raise EndoError("profile mismatch between the two elements")
    if phi_x.degree != phi_y.degree:
        raise EndoError("degree mismatch between the two elements")
    push = f.profile_map(phi_x.out_profile).compose(phi_x.chain)
    pull = phi_y.chain.compose(f.profile_map(phi_x.in_profile))
    residual = push.sub(pull)
    return residual.is_zero(), residual


def morphism_witness(f: FamilyMap, assignment_x, assignment_y):
    """Common-lift witness: f is a morphism of algebras iff every generator image
    pair lands in E_f.

    assignment_x / assignment_y: dict generator name -> EndoElement over the
    source / target family.  Returns (witness dict or None, failures list);
    the witness maps each generator to its (phi_x, phi_y) pair, the element of
    the relative construction both structures descend from.
    """
    witness = {}
    failures = []
    for name in sorted(assignment_x):
        if name not in assignment_y:
            failures.append((name, "missing on the target side"))
            continue
        ok, residual = relative_endo_membership(f, assignment_x[name], assignment_y[name])
        if ok:
            witness[name] = (assignment_x[name], assignment_y[name])
        else:
            failures.append((name, residual))
            break
    if failures:
        return None, failures
    return witness, []

"""Shared random generators for the test suites (seeded, deterministic)."""

import random
from fractions import Fraction

from propcalc.graphs import Generator, Signature
from propcalc.exprs import (
    GenExpr,
    HCompExpr,
    LeftActExpr,
    RightActExpr,
    VCompExpr,
)
from propcalc.profiles import Palette, Permutation, Profile

F = Fraction


def random_signature(rng, max_colors=3, max_generators=4, max_arity=3, with_unaries=True):
    """Random signature; always includes a unary generator per color so that
    expressions with any prescribed output profile exist."""
    n_colors = rng.randint(1, max_colors)
    palette = Palette(["c%d" % i for i in range(n_colors)])
    gens = []
    if with_unaries:
        for c in palette.colors:
            gens.append(
                Generator("u_%s" % c, Profile(palette, [c]), Profile(palette, [c]), 0)
            )
    n_extra = rng.randint(1, max_generators)
    for k in range(n_extra):
        n_out = rng.randint(1, 2)
        n_in = rng.randint(1, max_arity)
        out_p = Profile(palette, [rng.choice(palette.colors) for _ in range(n_out)])
        in_p = Profile(palette, [rng.choice(palette.colors) for _ in range(n_in)])
        gens.append(Generator("g%d" % k, out_p, in_p, 0))
    return Signature(palette, gens)


def unary_chain(sig, profile):
    """(x)_i u_{c_i}: expression with out = in = profile."""
    expr = None
    for c in profile.entries:
        g = GenExpr(sig, "u_%s" % c)
        expr = g if expr is None else HCompExpr(expr, g)
    return expr


def random_permutation(rng, n):
    imgs = list(range(1, n + 1))
    rng.shuffle(imgs)
    return Permutation(imgs)


def random_expression_with_out(sig, rng, out_profile, depth=2):
    """Random expression with the given output profile (depth-bounded)."""
    candidates = [
        name
        for name, g in sig.generators.items()
        if g.out_profile == out_profile
    ]
    if candidates and rng.random() < 0.5:
        expr = GenExpr(sig, rng.choice(candidates))
    else:
        expr = unary_chain(sig, out_profile)
    while depth > 0 and rng.random() < 0.6:
        depth -= 1
        lower = random_expression_with_out(sig, rng, expr.in_profile, depth)
        expr = VCompExpr(expr, lower)
    if rng.random() < 0.4:
        tau = random_permutation(rng, len(expr.in_profile))
        expr = RightActExpr(expr, tau)
    return expr


def random_expression(sig, rng, depth=2):
    names = sorted(sig.generators)
    expr = GenExpr(sig, rng.choice(names))
    for _ in range(depth):
        roll = rng.random()
        if roll < 0.35:
            other = GenExpr(sig, rng.choice(names))
            expr = HCompExpr(expr, other) if rng.random() < 0.5 else HCompExpr(other, expr)
        elif roll < 0.7:
            lower = random_expression_with_out(sig, rng, expr.in_profile, 1)
            expr = VCompExpr(expr, lower)
        elif roll < 0.85:
            expr = LeftActExpr(random_permutation(rng, len(expr.out_profile)), expr)
        else:
            expr = RightActExpr(expr, random_permutation(rng, len(expr.in_profile)))
    return expr


def interchange_quadruple(sig, rng, depth=1):
    """(e1, e2, e3, e4) with e1 o e3, e2 o e4 composable: the interchange inputs."""
    e1 = random_expression(sig, rng, depth)
    e2 = random_expression(sig, rng, depth)
    e3 = random_expression_with_out(sig, rng, e1.in_profile, depth)
    e4 = random_expression_with_out(sig, rng, e2.in_profile, depth)
    return e1, e2, e3, e4


# -- associative-up-to-homotopy setup (one color) -----------------------------

from propcalc.chains import ChainComplex, ChainMap, base_field_complex, direct_sum, disc_complex
from propcalc.endo import ColoredFamily, EndoElement, FamilyMap
from propcalc.exprs import PropPresentation, parse


def homotopy_assoc_presentation():
    """mu2, iota degree 0; mu3 degree 1 with d(mu3) = the associator."""
    palette = Palette(["c"])
    c = lambda *xs: Profile(palette, xs)
    sig = Signature(
        palette,
        [
            Generator("mu2", c("c"), c("c", "c"), 0),
            Generator("iota", c("c"), c("c"), 0),
            Generator("mu3", c("c"), c("c", "c", "c"), 1),
        ],
    )
    d3 = [
        (F(1), parse("mu2 o (mu2 * iota)", sig)),
        (F(-1), parse("mu2 o (iota * mu2)", sig)),
    ]
    return PropPresentation(sig, {"mu3": d3})


def ground_field_structure(presentation):
    """The strictly associative structure on Q[0]: mu2 = multiplication."""
    palette = presentation.signature.palette
    fam = ColoredFamily(palette, {"c": base_field_complex()})
    sig = presentation.signature
    assignment = {
        "mu2": EndoElement.from_mats(
            fam, sig["mu2"].out_profile, sig["mu2"].in_profile, 0, {0: [[F(1)]]}
        ),
        "iota": EndoElement.from_mats(
            fam, sig["iota"].out_profile, sig["iota"].in_profile, 0, {0: [[F(1)]]}
        ),
        "mu3": EndoElement.zero(
            fam, sig["mu3"].out_profile, sig["mu3"].in_profile, 1
        ),
    }
    from propcalc.algebras import AlgebraStructure

    return AlgebraStructure(presentation, fam, assignment)


def field_plus_disc_family(palette):
    return ColoredFamily(palette, {"c": direct_sum(base_field_complex(), disc_complex())})


def projection_to_field(palette):
    """X = Q[0] + D --> Q[0], an entrywise acyclic fibration."""
    fam_x = field_plus_disc_family(palette)
    fam_y = ColoredFamily(palette, {"c": base_field_complex()})
    proj = ChainMap(fam_x.complexes["c"], fam_y.complexes["c"], {0: [[1, 0]]})
    return FamilyMap(fam_x, fam_y, {"c": proj})


def inclusion_from_field(palette):
    """Q[0] --> Q[0] + D, an entrywise acyclic cofibration."""
    fam_x = ColoredFamily(palette, {"c": base_field_complex()})
    fam_y = field_plus_disc_family(palette)
    inc = ChainMap(fam_x.complexes["c"], fam_y.complexes["c"], {0: [[1], [0]]})
    return FamilyMap(fam_x, fam_y, {"c": inc})

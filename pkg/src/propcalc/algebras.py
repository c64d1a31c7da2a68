"""Algebra structures over quasi-free presentations and the transfer engine.

An algebra is an assignment of generator names to endo elements whose
hom-complex boundaries match the presentation differential (D(lambda g) =
lambda(dg)) and which satisfies the declared relations.  Transfer moves such a
structure through an entrywise acyclic (co)fibration by solving, generator by
generator in increasing degree, the linear system consisting of the
chain-compatibility constraint and the morphism square; triangularity of the
differential is what makes the right-hand sides available when needed.
"""

from __future__ import annotations

from fractions import Fraction

from propcalc import linalg
from propcalc.chains import ChainMap, LiftProblem, Unsolvable, boundary_of_map
from propcalc.endo import (
    ColoredFamily,
    EndoElement,
    EndoError,
    FamilyMap,
    endo_horizontal,
    endo_permute,
    endo_vertical,
    morphism_witness,
)
from propcalc.exprs import (
    Expression,
    GenExpr,
    HCompExpr,
    LeftActExpr,
    PropPresentation,
    RightActExpr,
    VCompExpr,
    validate_presentation,
)
from propcalc.profiles import Permutation

ONE = Fraction(1)


class AlgebraError(ValueError):
    pass


class TransferError(RuntimeError):
    """Unsolvable transfer system: names the generator and what to re-examine."""

    def __init__(self, generator, message, certificate=None):
        super().__init__("generator %r: %s" % (generator, message))
        self.generator = generator
        self.certificate = certificate


class AlgebraStructure:
    """presentation + family + assignment (generator name -> EndoElement)."""

    def __init__(self, presentation: PropPresentation, family: ColoredFamily, assignment):
        if presentation.signature.palette != family.palette:
            raise AlgebraError("presentation and family use different palettes")
        self.presentation = presentation
        self.family = family
        self.assignment = dict(assignment)
        for name, gen in presentation.signature.generators.items():
            if name not in self.assignment:
                raise AlgebraError("assignment misses generator %r" % name)
            el = self.assignment[name]
            if (
                el.out_profile.entries != gen.out_profile.entries
                or el.in_profile.entries != gen.in_profile.entries
                or el.degree != gen.degree
            ):
                raise AlgebraError("assignment for %r has the wrong shape" % name)


def evaluate(e: Expression, structure_or_assignment, family: ColoredFamily = None) -> EndoElement:
    """Structural evaluation: generators through the assignment, compositions
    through the endomorphism operations."""
    if isinstance(structure_or_assignment, AlgebraStructure):
        assignment = structure_or_assignment.assignment
        family = structure_or_assignment.family
    else:
        assignment = structure_or_assignment
        if family is None:
            raise AlgebraError("evaluate needs the family when given a bare assignment")
    return _eval(e, assignment, family)


def _eval(e, assignment, family):
    if isinstance(e, GenExpr):
        try:
            return assignment[e.name]
        except KeyError:
            raise AlgebraError("no assignment for generator %r" % e.name)
    if isinstance(e, VCompExpr):
        return endo_vertical(_eval(e.left, assignment, family), _eval(e.right, assignment, family))
    if isinstance(e, HCompExpr):
        return endo_horizontal(_eval(e.left, assignment, family), _eval(e.right, assignment, family))
    if isinstance(e, LeftActExpr):
        body = _eval(e.body, assignment, family)
        return endo_permute(e.perm, Permutation.identity(len(body.in_profile)), body)
    if isinstance(e, RightActExpr):
        body = _eval(e.body, assignment, family)
        return endo_permute(Permutation.identity(len(body.out_profile)), e.perm, body)
    raise TypeError("unknown expression node %r" % (e,))


def evaluate_combination(terms, assignment, family, template: EndoElement) -> EndoElement:
    """Sum of coeff * evaluate(expr); template fixes the shape when empty."""
    total = EndoElement.zero(
        family, template.out_profile, template.in_profile, template.degree
    )
    for coeff, expr in terms:
        total = total.add(_eval(expr, assignment, family).scale(coeff))
    return total


def check_algebra(structure: AlgebraStructure):
    """Verify D(lambda g) = lambda(dg) for every generator and all relations.

    Returns a report list of (kind, name_or_index, residual); empty = pass.
    """
    report = []
    pres = structure.presentation
    fam = structure.family
    for name in sorted(pres.signature.generators):
        el = structure.assignment[name]
        lhs = el.boundary()
        rhs = evaluate_combination(
            pres.delta(name),
            structure.assignment,
            fam,
            EndoElement.zero(fam, el.out_profile, el.in_profile, el.degree - 1),
        )
        residual = lhs.sub(rhs)
        if not residual.is_zero():
            report.append(("differential", name, residual))
    for idx, (lhs_e, rhs_e) in enumerate(pres.relations):
        lhs = _eval(lhs_e, structure.assignment, fam)
        rhs = _eval(rhs_e, structure.assignment, fam)
        residual = lhs.sub(rhs)
        if not residual.is_zero():
            report.append(("relation", idx, residual))
    return report


def check_morphism(f: FamilyMap, structure_x: AlgebraStructure, structure_y: AlgebraStructure):
    """f is a morphism of algebras iff both structures descend from one map
    into the relative endomorphism construction (checked generator by
    generator).  Returns (bool, failures)."""
    if structure_x.presentation is not structure_y.presentation:
        # same presentation content is enough; identity check is the cheap gate
        if structure_x.presentation.signature.generators.keys() != structure_y.presentation.signature.generators.keys():
            raise AlgebraError("morphism check needs a common presentation")
    witness, failures = morphism_witness(f, structure_x.assignment, structure_y.assignment)
    return witness is not None, failures


# ---------------------------------------------------------------------------
# transfer


def _require_entrywise(f: FamilyMap, flag: str):
    bad = []
    for color, flags in f.classify().items():
        if not flags[flag]:
            bad.append(color)
    return bad


def _d_constraint_terms(unknown_src, unknown_tgt, degree, rhs_chain):
    """Equations for D(phi) = rhs on a degree-`degree` unknown phi."""
    sign = -ONE if degree % 2 else ONE
    equations = []
    for j in unknown_src.degrees():
        rows = unknown_tgt.dim(j + degree - 1)
        cols = unknown_src.dim(j)
        if rows == 0 or cols == 0:
            continue
        terms = []
        if unknown_tgt.dim(j + degree):
            terms.append((ONE, unknown_tgt.d(j + degree), j, None))
        if unknown_src.dim(j - 1):
            terms.append((-sign, None, j - 1, unknown_src.d(j)))
        equations.append((terms, rhs_chain.mat(j)))
    return equations


def _solve_generator(gen_name, src_space, tgt_space, degree, equations):
    try:
        prob = LiftProblem(src_space, tgt_space, degree)
        for terms, rhs in equations:
            prob.add_equation(terms, rhs)
        return prob.solve()
    except Unsolvable as exc:
        raise TransferError(
            gen_name,
            "lift system inconsistent; re-examine the map classification "
            "(acyclic fibration/cofibration entrywise) and the triangular "
            "quasi-free differential",
            certificate=exc.certificate,
        )


def transfer(presentation: PropPresentation, f: FamilyMap, direction: str, source: AlgebraStructure):
    """Move an algebra structure through f, per generator in increasing degree.

    direction 'alongAcyclicFibration': f: X -> Y entrywise acyclic fibration,
    `source` lives on Y, the result on X with f a morphism (result, source).
    direction 'alongAcyclicCofibration': f: X -> Y entrywise acyclic
    cofibration, `source` lives on X, the result on Y with f a morphism
    (source, result).

    Returns (structure, report).  Raises TransferError when the solver hits an
    inconsistent system, which signals violated preconditions.
    """
    report = {"direction": direction, "notes": []}
    failures = validate_presentation(presentation)
    if failures:
        raise AlgebraError("presentation invalid: %s" % "; ".join(failures))
    if presentation.relations:
        report["notes"].append(
            "presentation has strict relations: transfer attempted, relation "
            "checks reported, no guarantee applies"
        )
    if direction == "alongAcyclicFibration":
        bad = _require_entrywise(f, "acyclicFibration")
        if bad:
            raise AlgebraError(
                "map is not an entrywise acyclic fibration at colors %r" % (bad,)
            )
        if source.family is not f.target:
            # allow structural equality
            if any(
                source.family.complexes[c].dims != f.target.complexes[c].dims
                for c in f.target.palette.colors
            ):
                raise AlgebraError("source structure must live on the map target")
        new_family = f.source
    elif direction == "alongAcyclicCofibration":
        bad = _require_entrywise(f, "acyclicCofibration")
        if bad:
            raise AlgebraError(
                "map is not an entrywise acyclic cofibration at colors %r" % (bad,)
            )
        if source.family is not f.source:
            if any(
                source.family.complexes[c].dims != f.source.complexes[c].dims
                for c in f.source.palette.colors
            ):
                raise AlgebraError("source structure must live on the map source")
        new_family = f.target
    else:
        raise AlgebraError(
            "direction must be 'alongAcyclicFibration' or 'alongAcyclicCofibration'"
        )

    new_assignment = {}
    for name in presentation.generators_by_degree():
        gen = presentation.signature[name]
        out_space = new_family.space(gen.out_profile).complex
        in_space = new_family.space(gen.in_profile).complex
        rhs_d = evaluate_combination(
            presentation.delta(name),
            new_assignment,
            new_family,
            EndoElement.zero(new_family, gen.out_profile, gen.in_profile, gen.degree - 1),
        )
        equations = _d_constraint_terms(in_space, out_space, gen.degree, rhs_d.chain)
        given = source.assignment[name]
        if direction == "alongAcyclicFibration":
            # f_d o phi = lambda_Y(g) o f_c
            f_out = f.profile_map(gen.out_profile)
            f_in = f.profile_map(gen.in_profile)
            rhs_m = given.chain.compose(f_in)
            for j in in_space.degrees():
                rows = f_out.target.dim(j + gen.degree)
                cols = in_space.dim(j)
                if rows == 0 or cols == 0:
                    continue
                equations.append(
                    ([(ONE, f_out.mat(j + gen.degree), j, None)], rhs_m.mat(j))
                )
        else:
            # phi o f_c = f_d o lambda_X(g)
            f_out = f.profile_map(gen.out_profile)
            f_in = f.profile_map(gen.in_profile)
            rhs_m = f_out.compose(given.chain)
            for j in f_in.source.degrees():
                rows = out_space.dim(j + gen.degree)
                cols = f_in.source.dim(j)
                if rows == 0 or cols == 0:
                    continue
                equations.append(([(ONE, None, j, f_in.mat(j))], rhs_m.mat(j)))
        chain = _solve_generator(name, in_space, out_space, gen.degree, equations)
        new_assignment[name] = EndoElement(
            new_family, gen.out_profile, gen.in_profile, chain
        )

    result = AlgebraStructure(presentation, new_family, new_assignment)
    algebra_report = check_algebra(result)
    if direction == "alongAcyclicFibration":
        ok, morphism_failures = check_morphism(f, result, source)
    else:
        ok, morphism_failures = check_morphism(f, source, result)
    report["algebra_failures"] = algebra_report
    report["morphism_ok"] = ok
    report["morphism_failures"] = morphism_failures
    differential_failures = [r for r in algebra_report if r[0] == "differential"]
    if differential_failures or not ok:
        raise TransferError(
            differential_failures[0][1] if differential_failures else "<morphism>",
            "post-verification failed after a successful solve; this indicates "
            "an internal inconsistency",
        )
    return result, report


def factor_algebra(
    g: FamilyMap,
    lambda_a: AlgebraStructure,
    lambda_c: AlgebraStructure,
    b_family: ColoredFamily,
    i: FamilyMap,
    p: FamilyMap,
):
    """Equip the middle of a factorization A --i--> B --p--> C with a structure
    making both legs morphisms.

    Preconditions: i entrywise acyclic cofibration, p entrywise fibration,
    p o i = g, one triangular quasi-free presentation on both ends.
    Returns (structure on B, report).
    """
    presentation = lambda_a.presentation
    failures = validate_presentation(presentation)
    if failures:
        raise AlgebraError("presentation invalid: %s" % "; ".join(failures))
    bad = _require_entrywise(i, "acyclicCofibration")
    if bad:
        raise AlgebraError("i is not an entrywise acyclic cofibration at %r" % (bad,))
    bad = _require_entrywise(p, "fibration")
    if bad:
        raise AlgebraError("p is not an entrywise fibration at %r" % (bad,))
    for c in g.source.palette.colors:
        if p.maps[c].compose(i.maps[c]) != g.maps[c]:
            raise AlgebraError("p o i differs from g at color %r" % (c,))

    new_assignment = {}
    report = {"notes": []}
    for name in presentation.generators_by_degree():
        gen = presentation.signature[name]
        out_space = b_family.space(gen.out_profile).complex
        in_space = b_family.space(gen.in_profile).complex
        rhs_d = evaluate_combination(
            presentation.delta(name),
            new_assignment,
            b_family,
            EndoElement.zero(b_family, gen.out_profile, gen.in_profile, gen.degree - 1),
        )
        equations = _d_constraint_terms(in_space, out_space, gen.degree, rhs_d.chain)
        i_out = i.profile_map(gen.out_profile)
        i_in = i.profile_map(gen.in_profile)
        p_out = p.profile_map(gen.out_profile)
        p_in = p.profile_map(gen.in_profile)
        # beta o i_c = i_d o lambda_A(g)
        rhs1 = i_out.compose(lambda_a.assignment[name].chain)
        for j in i_in.source.degrees():
            rows = out_space.dim(j + gen.degree)
            cols = i_in.source.dim(j)
            if rows == 0 or cols == 0:
                continue
            equations.append(([(ONE, None, j, i_in.mat(j))], rhs1.mat(j)))
        # p_d o beta = lambda_C(g) o p_c
        rhs2 = lambda_c.assignment[name].chain.compose(p_in)
        for j in in_space.degrees():
            rows = p_out.target.dim(j + gen.degree)
            cols = in_space.dim(j)
            if rows == 0 or cols == 0:
                continue
            equations.append(([(ONE, p_out.mat(j + gen.degree), j, None)], rhs2.mat(j)))
        chain = _solve_generator(name, in_space, out_space, gen.degree, equations)
        new_assignment[name] = EndoElement(
            b_family, gen.out_profile, gen.in_profile, chain
        )
    result = AlgebraStructure(presentation, b_family, new_assignment)
    ok_i, fail_i = check_morphism(i, lambda_a, result)
    ok_p, fail_p = check_morphism(p, result, lambda_c)
    report["algebra_failures"] = check_algebra(result)
    report["i_morphism_ok"] = ok_i
    report["p_morphism_ok"] = ok_p
    if not ok_i or not ok_p or any(r[0] == "differential" for r in report["algebra_failures"]):
        raise TransferError("<factorization>", "post-verification failed")
    return result, report

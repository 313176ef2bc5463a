"""Watch inequality constants stay bounded under refinement and blow up on flattening cells.

Run with ``python demos/constant_sweeps.py``; takes a few seconds.
"""

from broken_sobolev.constants_lab import sweep
from broken_sobolev.mesh_gen import parse_family


def show(title, result):
    print(f"\n{title}")
    print(f"{'level':>5} {'cells':>6} {'K':>8} {'constant':>10}")
    for r in result.rows:
        print(f"{r.level:>5} {r.cells:>6} {r.K:>8.3f} {r.constant:>10.5f}")
    print(f"max/min over the family: {result.band():.4f}")


if __name__ == "__main__":
    red = parse_family("red:square2:levels=0..3")
    show("trace constant (squared), red refinement of the square", sweep(red, "trace"))
    show("Poincare constant with boundary mean seminorm",
         sweep(red, "poincare", {"seminorm": "f1:all-boundary"}))
    show("strip constant, delta = 0.25, L-shape",
         sweep(parse_family("red:lshape1:levels=0..2"), "strip", {"delta": 0.25}))
    # cells get thinner: K grows and the trace constant follows it
    show("trace constant on increasingly degenerate cells",
         sweep(parse_family("degenerate:square2:factors=1,2,4,8"), "trace"))

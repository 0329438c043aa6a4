"""Exact admissible exponents for the contraction argument.

Everything here is rational arithmetic.  For each dimension we construct
an admissible pair and its dual at a few regularities, then show where the
construction stops working.
"""

from fractions import Fraction

from fracwave.admiss import construct_pairs, optimality_scan, rational_grid, render

for d in (2, 3, 4):
    for s in (Fraction(1, 3), Fraction(1, 2)):
        c = construct_pairs(d, s)
        print(f"d={d} s={s}: (q, r)=({render(c.admissible.q)}, {render(c.admissible.r)})  "
              f"dual=({render(c.dual.q)}, {render(c.dual.r)})  ok={c.ok}")

print("\nscan over s in (1/4, 1/2]:")
for row in optimality_scan(range(2, 9), rational_grid(Fraction(1, 4), Fraction(1, 2), 4)):
    q = render(row.q_at_r_max) if row.q_at_r_max is not None else "none"
    qt = render(row.qt_at_rt_min) if row.qt_at_rt_min is not None else "none"
    print(f"  d={row.d} s={row.s}: q={q} qt={qt} strict={row.q_strict} scaling={row.scaling_feasible} "
          f"ok={row.construct_ok}")

"""Alignment inspection: text table and a static SVG of the halting curve."""

from __future__ import annotations

from .halting import HaltingTrace


def alignment_table(trace: HaltingTrace) -> str:
    """One row per encoder step: activation, within-segment running sum,
    halting probability, segment id, and whether a context was emitted."""
    lines = [f"{'step':>4}  {'a':>8}  {'run_sum':>8}  {'p':>8}  "
             f"{'seg':>4}  emitted"]
    reset_at = {s.start for s in trace.segments}
    if trace.pending is not None:
        reset_at.add(trace.pending[0])
    run = 0.0
    for j, a in enumerate(trace.activations):
        if j in reset_at:
            run = 0.0
        run += a
        seg = trace.segment_of(j)
        seg_txt = f"{seg}" if seg is not None else "tail"
        emitted = "yes" if any(s.end == j for s in trace.segments) else ""
        lines.append(f"{j:>4}  {a:>8.4f}  {run:>8.4f}  "
                     f"{trace.probs[j]:>8.4f}  {seg_txt:>4}  {emitted}")
    return "\n".join(lines)


def alignment_svg(trace: HaltingTrace, threshold: float | None = None) -> str:
    """Activation curve with segment boundaries as vertical lines."""
    T = len(trace.activations)
    w, h = max(320, 14 * T + 60), 240
    x0, y0, plot_w, plot_h = 40, 20, w - 60, h - 60

    def x(j):
        return x0 + plot_w * (j / max(T - 1, 1))

    def y(v):
        return y0 + plot_h * (1.0 - v)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" '
             f'height="{h}" viewBox="0 0 {w} {h}">',
             f'<rect x="{x0}" y="{y0}" width="{plot_w}" height="{plot_h}" '
             'fill="none" stroke="#888"/>']
    if threshold is not None:
        parts.append(f'<line x1="{x0}" y1="{y(threshold):.1f}" '
                     f'x2="{x0 + plot_w}" y2="{y(threshold):.1f}" '
                     'stroke="#c66" stroke-dasharray="4 3"/>')
    for seg in trace.segments:
        bx = x(seg.end)
        parts.append(f'<line x1="{bx:.1f}" y1="{y0}" x2="{bx:.1f}" '
                     f'y2="{y0 + plot_h}" stroke="#4a8" />')
    pts = " ".join(f"{x(j):.1f},{y(a):.1f}"
                   for j, a in enumerate(trace.activations))
    parts.append(f'<polyline points="{pts}" fill="none" stroke="#226"/>')
    for j, a in enumerate(trace.activations):
        parts.append(f'<circle cx="{x(j):.1f}" cy="{y(a):.1f}" r="2.5" '
                     'fill="#226"/>')
    parts.append(f'<text x="{x0}" y="{h - 8}" font-size="11">'
                 f'steps 0..{T - 1}; vertical lines mark segment ends'
                 '</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def boundary_alignment(trace: HaltingTrace, bounds: list[int],
                       factor: int) -> tuple[int, int]:
    """How many inferred segment ends fall within one encoder step of the
    true label boundaries. Returns (hits, total true boundaries)."""
    true_ends = [(b - 1) // factor for b in bounds]
    inferred = [s.end for s in trace.segments]
    hits = sum(1 for t, e in zip(true_ends, inferred) if abs(t - e) <= 1)
    return hits, len(true_ends)

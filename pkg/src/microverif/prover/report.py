"""Plain-text and HTML summaries of proof runs."""

from __future__ import annotations

import html
from typing import Mapping, Sequence, Union

from ..isa.catalog import VARIANTS
from ..sat import ProofResult
from .obligations import KINDS, ProofObligation

Results = Union[Mapping[str, ProofResult], Sequence[tuple[ProofObligation, ProofResult]]]


def _as_dict(results: Results) -> dict[str, ProofResult]:
    if isinstance(results, Mapping):
        return dict(results)
    return {ob.name: r for ob, r in results}


def _kind(name: str) -> str:
    head = name.split("/", 1)[0]
    return {"xlate": "xlate-ucode", "instr": "single-instruction"}.get(head, head)


def coverage(results: Results, certificates: Mapping[str, object] | None = None) -> dict[str, dict[str, str]]:
    """variant -> kind -> proved / failed / partial / not run."""
    from .compose import dependencies
    from .queries import default_query

    res = _as_dict(results)
    certificates = certificates or {}
    table = {}
    for vid in VARIANTS:
        deps = dependencies(default_query(vid))
        row = {}
        for kind in KINDS[:3]:
            got = [res[n] for n in deps[kind] if n in res]
            if not got:
                row[kind] = "not run"
            elif any(r.verdict != "proved" for r in got):
                row[kind] = "failed"
            else:
                row[kind] = "proved" if len(got) == len(deps[kind]) else "partial"
        row["single-instruction"] = "proved" if vid in certificates else "not run"
        table[vid] = row
    return table


def _verdict_line(name: str, r: ProofResult, timings: bool) -> str:
    line = f"{name}: {r.verdict}"
    if timings:
        line += f" {float(r.stats.get('seconds', 0.0)):.2f}s"
    return line


def generate_report(
    results: Results,
    fmt: str = "text",
    certificates: Mapping[str, object] | None = None,
    timings: bool = True,
    title: str = "proof report",
) -> str:
    """Verdicts, coverage and counterexamples; ``timings=False`` gives a reproducible body."""
    res = _as_dict(results)
    certificates = certificates or {}
    failing = {n: r for n, r in res.items() if r.verdict != "proved"}
    cov = coverage(res, certificates)
    if fmt == "html":
        return _html(title, res, failing, cov, certificates, timings)
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt}")
    out = [f"# {title}", f"obligations: {len(res)}",
           f"proved: {len(res) - len(failing)}", f"failing: {len(failing)}", ""]
    out.append("## verdicts")
    out += [_verdict_line(n, r, timings) for n, r in res.items()]
    out += ["", "## coverage", "variant: " + " | ".join(KINDS)]
    for vid, row in cov.items():
        out.append(f"{vid}: " + " | ".join(row[k] for k in KINDS))
    if certificates:
        out += ["", "## certificates"]
        for vid, cert in certificates.items():
            out.append(f"{vid}: {len(cert.lemma_names)} lemmas")
    if failing:
        out += ["", "## failing"]
        for n, r in failing.items():
            out.append(f"{n}: {r.verdict}")
            rep = (r.replay or {}).get("report")
            if rep is not None:
                out += ["  " + line for line in rep.lines()]
    return "\n".join(out) + "\n"


def _html(title, res, failing, cov, certificates, timings) -> str:
    e = html.escape
    rows = []
    for n, r in res.items():
        cls = "ok" if r.proved else "bad"
        t = f"<td>{float(r.stats.get('seconds', 0.0)):.2f}</td>" if timings else ""
        rows.append(f"<tr class='{cls}'><td>{e(n)}</td><td>{e(r.verdict)}</td>{t}</tr>")
    head_t = "<th>seconds</th>" if timings else ""
    parts = [
        "<!DOCTYPE html>",
        f"<html><head><meta charset='utf-8'><title>{e(title)}</title>",
        "<style>table{border-collapse:collapse}td,th{border:1px solid #999;padding:2px 6px}"
        ".ok{background:#dfd}.bad{background:#fdd}pre{background:#eee}</style></head><body>",
        f"<h1>{e(title)}</h1>",
        f"<p>{len(res)} obligations, {len(res) - len(failing)} proved, {len(failing)} failing</p>",
        f"<h2>Verdicts</h2><table><tr><th>obligation</th><th>verdict</th>{head_t}</tr>",
        *rows,
        "</table>",
        "<h2>Coverage</h2><table><tr><th>variant</th>" + "".join(f"<th>{k}</th>" for k in KINDS) + "</tr>",
    ]
    for vid, row in cov.items():
        cells = "".join(
            f"<td class='{'ok' if row[k] == 'proved' else 'bad' if row[k] == 'failed' else ''}'>{row[k]}</td>"
            for k in KINDS)
        parts.append(f"<tr><td>{e(vid)}</td>{cells}</tr>")
    parts.append("</table>")
    if certificates:
        parts.append("<h2>Certificates</h2>")
        for vid, cert in certificates.items():
            parts.append(f"<h3>{e(vid)}</h3><pre>{e(cert.text())}</pre>")
    if failing:
        parts.append("<h2 class='bad'>Failing obligations</h2>")
        for n, r in failing.items():
            rep = (r.replay or {}).get("report")
            body = rep.text() if rep is not None else r.verdict
            parts.append(f"<h3>{e(n)}</h3><pre>{e(body)}</pre>")
    parts.append("</body></html>")
    return "\n".join(parts) + "\n"

"""Command-line front end: one binary exposing every library operation.

Every invocation writes its outputs into a run directory (--out, default
./treequiv-run): config.txt echoes the effective run configuration,
report.txt holds the key=value report under a schema=1 header, and structure
or tree artifacts land next to them. Identical config and inputs produce
byte-identical outputs; nothing time- or machine-dependent is ever written.

Exit codes: 0 success, 1 property violation (verify-fvc counterexample,
failed kernel certificate, infeasible scale interval), 2 usage or parse
error, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import os
import random
import sys
from dataclasses import fields, replace

from .automata import default_validity_automaton, parse_automaton
from .config import DEFAULT_CONFIG, RunConfig, load_config
from .corpus import fvc_corpus, kernel_corpus, random_sentence, scale_corpus
from .eftypes import equiv as types_equiv
from .eftypes import structure_type
from .errors import (BudgetError, InfeasibleScaleError, ParseError,
                     TreequivError, UnsupportedShapeError)
from .fvc import Annotator, alphabet_digest, annotate, load_tables, save_tables, verify_fvc
from .logic import (eval_formula, format_formula, format_formula_file,
                    parse_formula_file, quantifier_rank, uses_set_syntax)
from .optrees import (count_nodes, evaluate, format_alphabet, format_tree,
                      iter_nodes, node_at, parse_alphabet, parse_tree, tree_height)
from .preservation import find_crux, pce_check, psc_check
from .reduction import kernelize, scale_generate
from .structures import Structure, Vocabulary, format_structure, parse_structure

_SCHEMA = "schema=1"


# ---------------------------------------------------------------------------
# input loading
# ---------------------------------------------------------------------------

def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror or exc}") from None


def _load_alphabet(path: str):
    base = os.path.dirname(os.path.abspath(path))

    def read_rel(name: str) -> str:
        return _read(os.path.join(base, name))

    return parse_alphabet(_read(path), read_file=read_rel)


def _load_structure(path: str) -> Structure:
    return parse_structure(_read(path))


def _parse_ids(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ParseError(f"expected comma-separated integers, got {text!r}") from None


def _elements_at(s: Structure, printed_ids: list[int]) -> frozenset:
    """Map 1-based printed element ids (the numbering used by structure files
    written by this tool) back to universe elements."""
    out = []
    for i in printed_ids:
        if not 1 <= i <= len(s.universe):
            raise ParseError(f"element id {i} out of range 1..{len(s.universe)}")
        out.append(s.universe[i - 1])
    return frozenset(out)


def _tokens_at(t, addresses: str) -> frozenset[int]:
    """Map comma-separated dotted child-index paths (root for the root node)
    to node tokens."""
    toks = []
    for part in addresses.split(","):
        part = part.strip()
        if not part:
            continue
        if part == "root":
            addr: tuple[int, ...] = ()
        else:
            try:
                addr = tuple(int(p) for p in part.split("."))
            except ValueError:
                raise ParseError(f"bad node address {part!r}") from None
        try:
            toks.append(node_at(t, addr).token)
        except (IndexError, ValueError):
            raise ParseError(f"no node at address {part!r}") from None
    return frozenset(toks)


def _bool(v) -> str:
    if v is None:
        return "n/a"
    return "true" if v else "false"


# ---------------------------------------------------------------------------
# composition-table cache
# ---------------------------------------------------------------------------

def _annotator_for(spec, m: int, mode: str, cfg: RunConfig):
    """Annotator with optional on-disk table reuse. Returns (annotator,
    cache_path or None, loaded flag)."""
    cache_dir = cfg.resolved_cache_dir()
    if not cache_dir:
        return Annotator(spec, m, mode, cfg), None, False
    try:
        digest = alphabet_digest(spec).hex()
    except ValueError:
        return Annotator(spec, m, mode, cfg), None, False
    path = os.path.join(cache_dir, f"{digest}-{mode}-m{m}.tables")
    if os.path.exists(path):
        return load_tables(spec, m, mode, path, config=cfg), path, True
    return Annotator(spec, m, mode, cfg), path, False


def _save_cache(ann, path: str | None):
    if path is None:
        return
    os.makedirs(os.path.dirname(path), exist_ok=True)
    save_tables(ann, path)


# ---------------------------------------------------------------------------
# subcommand handlers: each returns (report lines, artifacts, exit code,
# stdout override or None)
# ---------------------------------------------------------------------------

def _cmd_eval(args, cfg):
    spec = _load_alphabet(args.alphabet)
    t = parse_tree(_read(args.tree), spec)
    res = evaluate(t, spec)
    s = res.structure
    lines = [
        f"kind={spec.kind}",
        f"nodes={count_nodes(t)}",
        f"height={tree_height(t)}",
        f"size={s.size}",
        "structure=structure.str",
    ]
    return lines, {"structure.str": format_structure(s)}, 0, None


def _cmd_type(args, cfg):
    s = _load_structure(args.structure)
    fp = structure_type(s, args.rank, args.logic, config=cfg)
    lines = [
        f"size={s.size}",
        f"rank={args.rank}",
        f"logic={args.logic}",
        f"type={fp.hexdigest}",
    ]
    return lines, {}, 0, fp.hexdigest


def _cmd_equiv(args, cfg):
    a = _load_structure(args.a)
    b = _load_structure(args.b)
    same = types_equiv(a, b, args.rank, args.logic, config=cfg)
    lines = [
        f"rank={args.rank}",
        f"logic={args.logic}",
        f"size_a={a.size}",
        f"size_b={b.size}",
        f"equivalent={_bool(same)}",
    ]
    return lines, {}, 0, _bool(same)


def _cmd_annotate(args, cfg):
    spec = _load_alphabet(args.alphabet)
    t = parse_tree(_read(args.tree), spec)
    aut = parse_automaton(_read(args.automaton), spec) if args.automaton \
        else default_validity_automaton(spec)
    ann, cache_path, cache_hit = _annotator_for(spec, args.rank, args.logic, cfg)
    notes = annotate(t, spec, args.rank, args.logic, aut, config=cfg, annotator=ann)
    _save_cache(ann, cache_path)
    rows = []
    for addr, node in iter_nodes(t):
        note = notes[node.token]
        dotted = ".".join(str(i) for i in addr) or "root"
        rows.append(f"addr={dotted} sym={node.symbol} delta1={note.delta1.hexdigest} "
                    f"delta2={note.delta2}")
    root = notes[t.token]
    lines = [
        f"nodes={count_nodes(t)}",
        f"rank={args.rank}",
        f"logic={args.logic}",
        f"root_delta1={root.delta1.hexdigest}",
        f"root_delta2={root.delta2}",
        f"accepted={_bool(root.delta2 in aut.accepting)}",
        f"cache={'hit' if cache_hit else ('saved' if cache_path else 'off')}",
        "annotations=annotations.txt",
    ]
    return lines, {"annotations.txt": "\n".join(rows) + "\n"}, 0, None


def _cmd_kernel(args, cfg):
    spec = _load_alphabet(args.alphabet)
    t = parse_tree(_read(args.tree), spec)
    aut = parse_automaton(_read(args.automaton), spec) if args.automaton \
        else default_validity_automaton(spec)
    w: frozenset = frozenset()
    if args.w:
        w = _elements_at(evaluate(t, spec).structure, _parse_ids(args.w))
    b, cert = kernelize(t, spec, args.rank, args.logic, aut, w, config=cfg)
    ok = cert.all_conditions_ok()
    lines = [
        f"rank={cert.rank}",
        f"logic={cert.mode}",
        f"size_before={cert.size_before}",
        f"size_after={cert.size_after}",
        f"size_bound={cert.size_bound}",
        f"automaton_accepted={_bool(cert.automaton_accepted)}",
        f"literal_substructure={_bool(cert.literal_substructure)}",
        f"w_contained={_bool(cert.w_contained)}",
        f"size_within_bound={_bool(cert.size_within_bound)}",
        f"delta1_preserved={_bool(cert.delta1_preserved)}",
        f"oracle_checked={_bool(cert.oracle_checked)}",
        f"oracle_equivalent={_bool(cert.oracle_equivalent)}",
        f"certificate_ok={_bool(ok)}",
        "kernel=kernel.str",
        "kernel_tree=kernel_tree.sexp",
    ]
    artifacts = {"kernel.str": format_structure(b),
                 "kernel_tree.sexp": format_tree(cert.tree) + "\n"}
    return lines, artifacts, 0 if ok else 1, None


def _cmd_scale(args, cfg):
    spec = _load_alphabet(args.alphabet)
    t = parse_tree(_read(args.tree), spec)
    aut = parse_automaton(_read(args.automaton), spec) if args.automaton \
        else default_validity_automaton(spec)
    protected = _tokens_at(t, args.protect) if args.protect else frozenset()
    ann, cache_path, cache_hit = _annotator_for(spec, args.rank, args.logic, cfg)
    t2, rep = scale_generate(t, spec, args.rank, args.logic, args.min, args.max,
                             aut, protected, config=cfg, annotator=ann)
    _save_cache(ann, cache_path)
    ok = rep.all_flags_ok()
    s2 = evaluate(t2, spec).structure
    lines = [
        f"rank={rep.rank}",
        f"logic={rep.mode}",
        f"direction={rep.direction}",
        f"size_before={rep.size_before}",
        f"size_after={rep.size_after}",
        f"interval={rep.interval[0]}..{rep.interval[1]}",
        f"steps={rep.steps}",
        f"granularity={rep.granularity}",
        f"automaton_accepted={_bool(rep.automaton_accepted)}",
        f"delta1_preserved={_bool(rep.delta1_preserved)}",
        f"embedding_checked={_bool(rep.embedding_checked)}",
        f"embedding_ok={_bool(rep.embedding_ok)}",
        f"oracle_checked={_bool(rep.oracle_checked)}",
        f"oracle_equivalent={_bool(rep.oracle_equivalent)}",
        f"flags_ok={_bool(ok)}",
        f"cache={'hit' if cache_hit else ('saved' if cache_path else 'off')}",
        "scaled_tree=scaled_tree.sexp",
        "scaled=scaled.str",
    ]
    artifacts = {"scaled_tree.sexp": format_tree(t2) + "\n",
                 "scaled.str": format_structure(s2)}
    return lines, artifacts, 0 if ok else 1, None


def _formula_from_file(path: str):
    phi, voc, mode = parse_formula_file(_read(path))
    return phi, voc, mode


def _preservation_common(args, cfg, checker, prop: str):
    phi, voc, mode = _formula_from_file(args.formula)
    if mode != "fo":
        raise ParseError(f"{prop}-check requires a first-order sentence")
    class_filter = None
    if args.filter:
        psi, voc_f, mode_f = _formula_from_file(args.filter)
        if voc_f != voc:
            raise ParseError("filter sentence must use the same vocabulary")
        class_filter = lambda s: eval_formula(psi, s)
    symmetric = tuple(p for p in (args.symmetric or "").split(",") if p)
    verdict = checker(phi, voc, args.k, args.max_size, config=cfg,
                      symmetric_irreflexive=symmetric, class_filter=class_filter)
    lines = [
        f"property={verdict.property}",
        f"formula={verdict.formula}",
        f"k={verdict.k}",
        f"max_size={verdict.max_size}",
        f"status={verdict.status}",
        f"holds={_bool(verdict.holds)}",
        f"models_checked={verdict.models_checked}",
    ]
    artifacts: dict[str, str] = {}
    if verdict.counterexample is not None:
        lines.append("counterexample=counterexample.str")
        artifacts["counterexample.str"] = format_structure(verdict.counterexample)
    if verdict.cover is not None:
        lines.append(f"cover_size={len(verdict.cover)}")
        for i, member in enumerate(verdict.cover[:20]):
            name = f"cover_{i}.str"
            lines.append(f"cover_{i}={name}")
            artifacts[name] = format_structure(member)
    if verdict.witness is not None:
        w_struct, w_crux = verdict.witness
        pos = [w_struct.universe.index(e) + 1 for e in w_crux]
        lines.append("witness=witness.str")
        lines.append(f"witness_crux={','.join(str(p) for p in sorted(pos)) or 'empty'}")
        artifacts["witness.str"] = format_structure(w_struct)
    return lines, artifacts, 0, None


def _cmd_psc_check(args, cfg):
    return _preservation_common(args, cfg, psc_check, "psc")


def _cmd_pce_check(args, cfg):
    return _preservation_common(args, cfg, pce_check, "pce")


def _cmd_crux(args, cfg):
    phi, voc, mode = _formula_from_file(args.formula)
    if mode != "fo":
        raise ParseError("crux search requires a first-order sentence")
    s = _load_structure(args.structure)
    if s.voc != voc:
        raise ParseError("structure vocabulary does not match the sentence")
    cert = find_crux(phi, s, args.k, config=cfg)
    lines = [
        f"formula={format_formula(phi)}",
        f"k={args.k}",
        f"size={s.size}",
        f"found={_bool(cert is not None)}",
    ]
    if cert is not None:
        pos = sorted(s.universe.index(e) + 1 for e in cert.crux)
        lines.append(f"crux={','.join(str(p) for p in pos) or 'empty'}")
        lines.append(f"crux_size={len(cert.crux)}")
        lines.append(f"supersets_checked={cert.supersets_checked}")
    return lines, {}, 0, None


def _cmd_modelcheck(args, cfg):
    phi, voc, mode = _formula_from_file(args.formula)
    if args.structure:
        s = _load_structure(args.structure)
        if args.via_kernel:
            raise ParseError("--via-kernel needs --alphabet and --tree inputs")
    else:
        if not (args.alphabet and args.tree):
            raise ParseError("modelcheck needs --structure or --alphabet with --tree")
        spec = _load_alphabet(args.alphabet)
        t = parse_tree(_read(args.tree), spec)
        s = evaluate(t, spec).structure
    if s.voc != voc:
        raise ParseError("structure vocabulary does not match the sentence")
    rank = quantifier_rank(phi)
    lines = [
        f"formula={format_formula(phi)}",
        f"logic={mode}",
        f"rank={rank}",
        f"size={s.size}",
    ]
    artifacts: dict[str, str] = {}
    if args.via_kernel:
        b, cert = kernelize(t, spec, rank, mode, config=cfg)
        if not cert.all_conditions_ok():
            lines.append("kernel_certificate_ok=false")
            return lines, artifacts, 1, None
        value = eval_formula(phi, b)
        lines.append(f"kernel_size={b.size}")
        lines.append("kernel=kernel.str")
        artifacts["kernel.str"] = format_structure(b)
    else:
        value = eval_formula(phi, s)
    lines.append(f"value={_bool(value)}")
    return lines, artifacts, 0, _bool(value)


def _cmd_verify_fvc(args, cfg):
    spec = _load_alphabet(args.alphabet)
    ops = [args.op] if args.op else sorted(spec.ops)
    lines = [f"rank={args.rank}", f"logic={args.logic}", f"trials={args.trials}"]
    artifacts: dict[str, str] = {}
    failed = False
    for name in ops:
        rep = verify_fvc(spec, name, args.rank, args.logic,
                         trials=args.trials, seed=cfg.seed, config=cfg)
        lines.append(f"op.{name}.performed={rep.performed}")
        lines.append(f"op.{name}.classes={rep.classes}")
        lines.append(f"op.{name}.passed={_bool(rep.passed)}")
        if not rep.passed:
            failed = True
            if rep.counterexample:
                fa = f"counterexample_{name}_a.sexp"
                fb = f"counterexample_{name}_b.sexp"
                artifacts[fa] = rep.counterexample[0] + "\n"
                artifacts[fb] = rep.counterexample[1] + "\n"
                lines.append(f"op.{name}.counterexample={fa},{fb}")
    lines.append(f"passed={_bool(not failed)}")
    return lines, artifacts, 1 if failed else 0, None


def _corpus_alphabet_files(specs: dict) -> dict[str, str]:
    files: dict[str, str] = {}
    for name, spec in sorted(specs.items()):
        text, leaf_files = format_alphabet(spec)
        files[f"alphabets/{name}/alphabet.alpha"] = text
        for fname, content in leaf_files.items():
            files[f"alphabets/{name}/{fname}"] = content
    return files


def _cmd_gen_corpus(args, cfg):
    rng = random.Random(cfg.seed)
    artifacts: dict[str, str] = {}
    manifest = [f"family={args.family}", f"seed={cfg.seed}", f"count={args.count}"]
    if args.family == "sentences":
        voc = Vocabulary((("E", 2),), 0)
        for i in range(args.count):
            mode = "mso" if i % 3 == 0 else "fo"
            max_rank = 2 if mode == "mso" else 3
            from .logic import parse_formula
            phi = parse_formula(random_sentence(rng, voc, max_rank, mode), voc, mode)
            fname = f"formulas/{i:04d}.sentence"
            artifacts[fname] = format_formula_file(phi, voc, mode)
            manifest.append(f"item={i:04d} formula={fname} logic={mode} "
                            f"rank={quantifier_rank(phi)} "
                            f"mso_syntax={_bool(uses_set_syntax(phi))}")
    else:
        if args.family == "fvc":
            items = fvc_corpus(cfg.seed, args.count)
            rows = [(name, spec, t, {}) for name, spec, t in items]
        elif args.family == "kernel":
            items = kernel_corpus(cfg.seed, args.count)
            rows = []
            for name, spec, t, w in items:
                universe = evaluate(t, spec).structure.universe
                pos = sorted(universe.index(e) + 1 for e in w)
                rows.append((name, spec, t,
                             {"w": ",".join(str(p) for p in pos) or "empty"}))
        elif args.family == "scale":
            items = scale_corpus(cfg.seed, args.count)
            rows = [(name, spec, t, {"lo": str(lo), "hi": str(hi)})
                    for name, spec, t, lo, hi in items]
        else:
            raise ParseError(f"unknown corpus family {args.family!r}")
        specs = {name: spec for name, spec, *_ in rows}
        artifacts.update(_corpus_alphabet_files(specs))
        for i, (name, spec, t, extra) in enumerate(rows):
            fname = f"trees/{i:04d}.sexp"
            artifacts[fname] = format_tree(t) + "\n"
            extras = "".join(f" {k}={v}" for k, v in sorted(extra.items()))
            manifest.append(f"item={i:04d} alphabet={name} tree={fname}{extras}")
    artifacts["manifest.txt"] = "\n".join([_SCHEMA] + manifest) + "\n"
    lines = [f"family={args.family}", f"count={args.count}",
             f"files={len(artifacts)}", "manifest=manifest.txt"]
    return lines, artifacts, 0, None


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

_COMMANDS = {
    "eval": _cmd_eval,
    "type": _cmd_type,
    "equiv": _cmd_equiv,
    "annotate": _cmd_annotate,
    "kernel": _cmd_kernel,
    "scale": _cmd_scale,
    "psc-check": _cmd_psc_check,
    "pce-check": _cmd_pce_check,
    "crux": _cmd_crux,
    "modelcheck": _cmd_modelcheck,
    "verify-fvc": _cmd_verify_fvc,
    "gen-corpus": _cmd_gen_corpus,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    shared = common.add_argument_group("shared options")
    shared.add_argument("--config", default=argparse.SUPPRESS,
                        help="run configuration file (key=value lines)")
    shared.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="random seed override")
    shared.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                        help="parallelism degree override")
    shared.add_argument("--cache-dir", default=argparse.SUPPRESS,
                        help="composition-table cache directory")
    shared.add_argument("--out", default=argparse.SUPPRESS,
                        help="run directory for reports and artifacts")
    parser = argparse.ArgumentParser(
        prog="treequiv",
        description="rank-m logical equivalence over operation trees",
        parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    def cmd(name, **kwargs):
        return sub.add_parser(name, parents=[common], **kwargs)

    p = cmd("eval", help="evaluate an operation tree to a structure")
    p.add_argument("--alphabet", required=True)
    p.add_argument("--tree", required=True)

    p = cmd("type", help="rank-m equivalence type of a structure")
    p.add_argument("--structure", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--logic", choices=("fo", "mso"), default="fo")

    p = cmd("equiv", help="decide rank-m equivalence of two structures")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--logic", choices=("fo", "mso"), default="fo")

    p = cmd("annotate", help="per-node composed types and automaton states")
    p.add_argument("--alphabet", required=True)
    p.add_argument("--tree", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--logic", choices=("fo", "mso"), default="fo")
    p.add_argument("--automaton")

    p = cmd("kernel", help="extract a small rank-m equivalent substructure")
    p.add_argument("--alphabet", required=True)
    p.add_argument("--tree", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--logic", choices=("fo", "mso"), default="fo")
    p.add_argument("--automaton")
    p.add_argument("--w", help="comma-separated element ids to keep (as printed by eval)")

    p = cmd("scale", help="re-size a tree inside [min,max] preserving its type")
    p.add_argument("--alphabet", required=True)
    p.add_argument("--tree", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--logic", choices=("fo", "mso"), default="fo")
    p.add_argument("--min", type=int, required=True)
    p.add_argument("--max", type=int, required=True)
    p.add_argument("--automaton")
    p.add_argument("--protect", help="comma-separated node addresses (dotted, or root)")

    for name, prop in (("psc-check", "preservation under substructures"),
                       ("pce-check", "preservation under extensions (dual)")):
        p = cmd(name, help=f"decide {prop} with k exceptions up to a size bound")
        p.add_argument("--formula", required=True)
        p.add_argument("--k", type=int, required=True)
        p.add_argument("--max-size", type=int, required=True)
        p.add_argument("--filter", help="sentence file; only models of it are enumerated")
        p.add_argument("--symmetric",
                       help="comma-separated relations forced symmetric irreflexive")

    p = cmd("crux", help="minimum-size crux of a model, up to k elements")
    p.add_argument("--formula", required=True)
    p.add_argument("--structure", required=True)
    p.add_argument("--k", type=int, required=True)

    p = cmd("modelcheck", help="evaluate a sentence on a structure or tree")
    p.add_argument("--formula", required=True)
    p.add_argument("--structure")
    p.add_argument("--alphabet")
    p.add_argument("--tree")
    p.add_argument("--via-kernel", action="store_true",
                   help="evaluate on the kernel at the sentence's rank")

    p = cmd("verify-fvc", help="empirical congruence check for composition tables")
    p.add_argument("--alphabet", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--logic", choices=("fo", "mso"), default="fo")
    p.add_argument("--op", help="operation name (default: all operations)")
    p.add_argument("--trials", type=int, default=100)

    p = cmd("gen-corpus", help="write a seeded corpus for self-contained runs")
    p.add_argument("--family", choices=("fvc", "kernel", "scale", "sentences"),
                   required=True)
    p.add_argument("--count", type=int, required=True)

    return parser


def _config_from_args(args) -> RunConfig:
    config_file = getattr(args, "config", None)
    cfg = load_config(config_file) if config_file else RunConfig()
    overrides = {}
    for key in ("seed", "jobs", "cache_dir"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return replace(cfg, **overrides) if overrides else cfg


def _config_lines(cfg: RunConfig) -> list[str]:
    out = [_SCHEMA]
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            out.append(f"{f.name}={_bool(value)}")
        else:
            out.append(f"{f.name}={'' if value is None else value}")
    return out


def _write_run(outdir: str, command: str, cfg: RunConfig,
               lines: list[str], artifacts: dict[str, str], code: int):
    os.makedirs(outdir, exist_ok=True)
    report = [_SCHEMA, f"command={command}"] + lines + [f"exit={code}"]
    with open(os.path.join(outdir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(report) + "\n")
    with open(os.path.join(outdir, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(_config_lines(cfg)) + "\n")
    for name, content in sorted(artifacts.items()):
        path = os.path.join(outdir, name)
        os.makedirs(os.path.dirname(path) or outdir, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(content)
    return report


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code or 0
        return 2 if code not in (0,) else 0
    try:
        cfg = _config_from_args(args)
    except (ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    handler = _COMMANDS[args.command]
    stdout_override = None
    try:
        lines, artifacts, code, stdout_override = handler(args, cfg)
    except BudgetError as exc:
        lines, artifacts, code = _error_lines("budget", exc), {}, 3
    except InfeasibleScaleError as exc:
        lines, artifacts, code = _error_lines("infeasible-scale", exc), {}, 1
        if exc.achievable:
            lines.append(f"achievable={','.join(str(v) for v in exc.achievable)}")
    except (ParseError, UnsupportedShapeError) as exc:
        lines, artifacts, code = _error_lines("usage", exc), {}, 2
    except TreequivError as exc:
        lines, artifacts, code = _error_lines("usage", exc), {}, 2
    except ValueError as exc:
        lines, artifacts, code = _error_lines("usage", exc), {}, 2
    outdir = getattr(args, "out", None) or "treequiv-run"
    report = _write_run(outdir, args.command, cfg, lines, artifacts, code)
    if stdout_override is not None:
        print(stdout_override)
    else:
        print("\n".join(report))
    return code


def _error_lines(kind: str, exc: Exception) -> list[str]:
    message = " ".join(str(exc).split())
    return [f"error={kind}", f"message={message}"]


if __name__ == "__main__":
    sys.exit(main())

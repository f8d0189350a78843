"""End-to-end CLI runs through main(): exit codes, reports, artifacts,
determinism."""

import filecmp
import os

import pytest

from treequiv.cli import main
from treequiv.corpus import tree_alphabet, union_alphabet, word_alphabet
from treequiv.optrees import format_alphabet
from treequiv.structures import format_structure, parse_structure

from conftest import clique, graph, word


def write_alphabet(tmp_path, spec, name="alpha"):
    d = tmp_path / name
    d.mkdir(exist_ok=True)
    text, files = format_alphabet(spec)
    (d / "alphabet.alpha").write_text(text)
    for fname, content in files.items():
        (d / fname).write_text(content)
    return str(d / "alphabet.alpha")


def write_file(tmp_path, name, content):
    p = tmp_path / name
    p.write_text(content)
    return str(p)


GEQ1 = "rel E 2\nlabels 0\nmode fo\nformula exists x. x = x\n"
CLIQUE_F = ("rel E 2\nlabels 0\nmode fo\n"
            "formula forall x. forall y. ((x = y) | E(x, y))\n")
ALL_LOOPS_F = "rel E 2\nlabels 0\nmode fo\nformula forall x. E(x, x)\n"


def report_of(out):
    with open(os.path.join(out, "report.txt")) as fh:
        return dict(line.split("=", 1) for line in fh.read().splitlines()
                    if "=" in line)


def test_eval(tmp_path, specs, capsys):
    alpha = write_alphabet(tmp_path, specs["union"])
    tree = write_file(tmp_path, "t.sexp", "(union (leaf a) (leaf e))\n")
    out = str(tmp_path / "run")
    assert main(["eval", "--alphabet", alpha, "--tree", tree,
                 "--out", out]) == 0
    rep = report_of(out)
    assert rep["schema"] == "1" and rep["command"] == "eval"
    assert rep["size"] == "3" and rep["exit"] == "0"
    s = parse_structure(open(os.path.join(out, "structure.str")).read())
    assert s.size == 3
    assert os.path.exists(os.path.join(out, "config.txt"))
    assert "schema=1" in capsys.readouterr().out


def test_type_stdout(tmp_path, capsys):
    sfile = write_file(tmp_path, "k3.str", format_structure(clique(3)))
    out = str(tmp_path / "run")
    assert main(["type", "--structure", sfile, "--rank", "2",
                 "--out", out]) == 0
    fp = capsys.readouterr().out.strip()
    assert len(fp) == 64 and all(c in "0123456789abcdef" for c in fp)
    assert main(["type", "--structure", sfile, "--rank", "2",
                 "--out", str(tmp_path / "run2")]) == 0
    assert capsys.readouterr().out.strip() == fp


def test_equiv_stdout(tmp_path, capsys):
    a = write_file(tmp_path, "ab.str", format_structure(word("ab")))
    b = write_file(tmp_path, "ba.str", format_structure(word("ba")))
    assert main(["equiv", "--a", a, "--b", b, "--rank", "1",
                 "--out", str(tmp_path / "r1")]) == 0
    assert capsys.readouterr().out.strip() == "true"
    assert main(["equiv", "--a", a, "--b", b, "--rank", "2",
                 "--out", str(tmp_path / "r2")]) == 0
    assert capsys.readouterr().out.strip() == "false"


def test_annotate_and_cache(tmp_path, specs, capsys):
    alpha = write_alphabet(tmp_path, specs["union"])
    tree = write_file(tmp_path, "t.sexp", "(union (leaf a) (leaf b))\n")
    sfile = write_file(tmp_path, "s.str",
                       format_structure(graph(2, [], {1: 1, 2: 2}, 2)))
    cache = str(tmp_path / "cache")
    out1 = str(tmp_path / "r1")
    assert main(["annotate", "--alphabet", alpha, "--tree", tree, "--rank",
                 "2", "--cache-dir", cache, "--out", out1]) == 0
    rep1 = report_of(out1)
    assert rep1["cache"] == "saved"
    assert rep1["accepted"] == "true"
    assert os.path.exists(os.path.join(out1, "annotations.txt"))
    out2 = str(tmp_path / "r2")
    assert main(["annotate", "--alphabet", alpha, "--tree", tree, "--rank",
                 "2", "--cache-dir", cache, "--out", out2]) == 0
    assert report_of(out2)["cache"] == "hit"
    assert report_of(out2)["root_delta1"] == rep1["root_delta1"]
    capsys.readouterr()
    # the composed root class equals the oracle type of the evaluation
    assert main(["type", "--structure", sfile, "--rank", "2",
                 "--out", str(tmp_path / "r3")]) == 0
    assert capsys.readouterr().out.strip() == rep1["root_delta1"]


def test_kernel_deterministic(tmp_path, specs):
    alpha = write_alphabet(tmp_path, specs["union"])
    tree = write_file(tmp_path, "t.sexp",
                      "(union" + " (leaf a)" * 10 + ")\n")
    outs = []
    for name in ("r1", "r2"):
        out = str(tmp_path / name)
        assert main(["kernel", "--alphabet", alpha, "--tree", tree,
                     "--rank", "2", "--out", out]) == 0
        outs.append(out)
    rep = report_of(outs[0])
    assert (rep["size_before"], rep["size_after"]) == ("10", "3")
    assert rep["certificate_ok"] == "true"
    kernel = parse_structure(open(os.path.join(outs[0], "kernel.str")).read())
    assert kernel.size == 3
    for fname in ("report.txt", "config.txt", "kernel.str", "kernel_tree.sexp"):
        assert filecmp.cmp(os.path.join(outs[0], fname),
                           os.path.join(outs[1], fname), shallow=False), fname


def test_kernel_with_w(tmp_path, specs):
    alpha = write_alphabet(tmp_path, specs["union"])
    tree = write_file(tmp_path, "t.sexp",
                      "(union" + " (leaf a)" * 10 + ")\n")
    out = str(tmp_path / "run")
    assert main(["kernel", "--alphabet", alpha, "--tree", tree, "--rank", "2",
                 "--w", "5", "--out", out]) == 0
    rep = report_of(out)
    assert rep["size_after"] == "4"
    assert rep["w_contained"] == "true"


def test_scale_up_and_infeasible(tmp_path, specs):
    walpha = write_alphabet(tmp_path, specs["word"], "walpha")
    wtree = write_file(tmp_path, "w.sexp",
                       "(cat" + " (leaf a)" * 5 + ")\n")
    out = str(tmp_path / "up")
    assert main(["scale", "--alphabet", walpha, "--tree", wtree, "--rank",
                 "2", "--min", "20", "--max", "30", "--out", out]) == 0
    rep = report_of(out)
    assert (rep["direction"], rep["size_after"]) == ("up", "20")
    scaled = parse_structure(open(os.path.join(out, "scaled.str")).read())
    assert scaled.size == 20
    talpha = write_alphabet(tmp_path, specs["tree"], "talpha")
    ttree = write_file(tmp_path, "t.sexp",
                       "(builda (leaf a) (buildb (leaf b) (leaf a)))\n")
    out2 = str(tmp_path / "inf")
    assert main(["scale", "--alphabet", talpha, "--tree", ttree, "--rank",
                 "1", "--min", "1", "--max", "1", "--out", out2]) == 1
    rep2 = report_of(out2)
    assert rep2["error"] == "infeasible-scale"
    assert "achievable" in rep2


def test_psc_pce_checks(tmp_path):
    geq1 = write_file(tmp_path, "geq1.sentence", GEQ1)
    loops = write_file(tmp_path, "loops.sentence", ALL_LOOPS_F)
    out = str(tmp_path / "psc_true")
    assert main(["psc-check", "--formula", geq1, "--k", "1", "--max-size",
                 "3", "--symmetric", "E", "--out", out]) == 0
    rep = report_of(out)
    assert rep["holds"] == "true" and rep["status"] == "TRUE-UP-TO-3"
    assert os.path.exists(os.path.join(out, "witness.str"))
    out2 = str(tmp_path / "psc_false")
    assert main(["psc-check", "--formula", geq1, "--k", "0", "--max-size",
                 "3", "--symmetric", "E", "--out", out2]) == 0
    rep2 = report_of(out2)
    assert rep2["holds"] == "false"
    cex = parse_structure(open(os.path.join(out2, "counterexample.str")).read())
    assert cex.size == 1
    out3 = str(tmp_path / "pce_false")
    assert main(["pce-check", "--formula", loops, "--k", "0", "--max-size",
                 "3", "--out", out3]) == 0
    rep3 = report_of(out3)
    assert rep3["holds"] == "false"
    cover0 = parse_structure(open(os.path.join(out3, "cover_0.str")).read())
    assert cover0.size == 0


def test_psc_filter(tmp_path):
    loops = write_file(tmp_path, "loops.sentence", ALL_LOOPS_F)
    noloop = write_file(tmp_path, "noloop.sentence",
                        "rel E 2\nlabels 0\nmode fo\n"
                        "formula forall x. ~(E(x, x))\n")
    out = str(tmp_path / "run")
    assert main(["psc-check", "--formula", loops, "--k", "0", "--max-size",
                 "3", "--filter", noloop, "--out", out]) == 0
    assert report_of(out)["models_checked"] == "1"


def test_crux(tmp_path):
    cl = write_file(tmp_path, "clique.sentence", CLIQUE_F)
    k3 = write_file(tmp_path, "k3.str", format_structure(clique(3)))
    out = str(tmp_path / "run")
    assert main(["crux", "--formula", cl, "--structure", k3, "--k", "0",
                 "--out", out]) == 0
    rep = report_of(out)
    assert rep["found"] == "true" and rep["crux"] == "empty"
    assert rep["supersets_checked"] == "8"


def test_modelcheck(tmp_path, specs, capsys):
    cl = write_file(tmp_path, "clique.sentence", CLIQUE_F)
    k3 = write_file(tmp_path, "k3.str", format_structure(clique(3)))
    assert main(["modelcheck", "--formula", cl, "--structure", k3,
                 "--out", str(tmp_path / "r1")]) == 0
    assert capsys.readouterr().out.strip() == "true"
    alpha = write_alphabet(tmp_path, specs["union"])
    tree = write_file(tmp_path, "t.sexp",
                      "(union" + " (leaf a)" * 8 + ")\n")
    geq1 = write_file(tmp_path, "geq1l.sentence",
                      "rel E 2\nlabels 2\nmode fo\nformula exists x. x = x\n")
    out = str(tmp_path / "r2")
    assert main(["modelcheck", "--formula", geq1, "--alphabet", alpha,
                 "--tree", tree, "--via-kernel", "--out", out]) == 0
    assert capsys.readouterr().out.strip() == "true"
    rep = report_of(out)
    assert int(rep["kernel_size"]) < 8
    assert os.path.exists(os.path.join(out, "kernel.str"))


def test_verify_fvc(tmp_path, specs):
    alpha = write_alphabet(tmp_path, specs["union"])
    out = str(tmp_path / "run")
    assert main(["verify-fvc", "--alphabet", alpha, "--rank", "2",
                 "--trials", "8", "--out", out]) == 0
    rep = report_of(out)
    assert rep["op.union.passed"] == "true"
    assert rep["passed"] == "true"
    assert int(rep["op.union.performed"]) > 0


def test_gen_corpus_deterministic(tmp_path):
    outs = []
    for name in ("c1", "c2"):
        out = str(tmp_path / name)
        assert main(["gen-corpus", "--family", "kernel", "--count", "6",
                     "--seed", "3", "--out", out]) == 0
        outs.append(out)
    manifest = open(os.path.join(outs[0], "manifest.txt")).read()
    assert manifest.startswith("schema=1\nfamily=kernel\nseed=3\ncount=6")
    assert manifest.count("item=") == 6
    cmp = filecmp.dircmp(outs[0], outs[1])

    def assert_same(dc):
        assert not dc.diff_files and not dc.left_only and not dc.right_only
        for sub in dc.subdirs.values():
            assert_same(sub)

    assert_same(cmp)
    # written trees parse against the written alphabets
    from treequiv.optrees import parse_alphabet, parse_tree
    adir = os.path.join(outs[0], "alphabets", "union")
    spec = parse_alphabet(open(os.path.join(adir, "alphabet.alpha")).read(),
                          read_file=lambda f: open(os.path.join(adir, f)).read())
    first_union = next(
        line for line in manifest.splitlines() if "alphabet=union" in line)
    tree_file = first_union.split("tree=")[1].split()[0]
    parse_tree(open(os.path.join(outs[0], tree_file)).read(), spec)


def test_gen_corpus_sentences(tmp_path):
    out = str(tmp_path / "run")
    assert main(["gen-corpus", "--family", "sentences", "--count", "9",
                 "--out", out]) == 0
    manifest = open(os.path.join(out, "manifest.txt")).read()
    assert manifest.count("item=") == 9
    assert "logic=mso" in manifest and "logic=fo" in manifest
    from treequiv.logic import parse_formula_file
    for i in range(9):
        text = open(os.path.join(out, "formulas", f"{i:04d}.sentence")).read()
        parse_formula_file(text)


def test_usage_errors(tmp_path, capsys):
    assert main(["no-such-command"]) == 2
    assert main(["type", "--rank", "2"]) == 2  # missing --structure
    bad = write_file(tmp_path, "bad.str", "universe what\n")
    out = str(tmp_path / "run")
    assert main(["type", "--structure", bad, "--rank", "2",
                 "--out", out]) == 2
    rep = report_of(out)
    assert rep["error"] == "usage" and rep["exit"] == "2"
    capsys.readouterr()


def test_budget_exit(tmp_path):
    big = write_file(tmp_path, "big.str", format_structure(graph(12, [])))
    out = str(tmp_path / "run")
    assert main(["type", "--structure", big, "--rank", "2",
                 "--out", out]) == 3
    assert report_of(out)["error"] == "budget"


def test_shared_flags_both_positions(tmp_path, capsys):
    sfile = write_file(tmp_path, "k3.str", format_structure(clique(3)))
    out1 = str(tmp_path / "before")
    out2 = str(tmp_path / "after")
    assert main(["--out", out1, "type", "--structure", sfile,
                 "--rank", "1"]) == 0
    assert main(["type", "--structure", sfile, "--rank", "1",
                 "--out", out2]) == 0
    assert filecmp.cmp(os.path.join(out1, "report.txt"),
                       os.path.join(out2, "report.txt"), shallow=False)
    capsys.readouterr()


def test_config_file_flag(tmp_path, capsys):
    cfgfile = write_file(tmp_path, "run.cfg", "fo_cap = 14\n")
    big = write_file(tmp_path, "big.str", format_structure(graph(12, [])))
    out = str(tmp_path / "run")
    assert main(["type", "--structure", big, "--rank", "1",
                 "--config", cfgfile, "--out", out]) == 0
    with open(os.path.join(out, "config.txt")) as fh:
        assert "fo_cap=14" in fh.read().splitlines()
    capsys.readouterr()

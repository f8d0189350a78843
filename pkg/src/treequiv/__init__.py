"""treequiv: rank-m logical equivalence over operation trees.

Builds finite structures from operation trees (disjoint union, label-driven
joins, word concatenation, tree building), computes rank-m FO/MSO equivalence
types by a brute-force oracle, composes them through memoized tables, and uses
the compositional annotations to extract small equivalent substructures,
scale-shifted self-similar structures, and brute-force certificates for
substructure-preservation properties.
"""

from .config import RunConfig, DEFAULT_CONFIG, load_config
from .errors import (ArityError, BudgetError, FingerprintCollisionError,
                     InfeasibleScaleError, ParseError, TreequivError,
                     UnsupportedShapeError)
from .structures import (Structure, Vocabulary, enumerate_structures, format_structure,
                         induced_substructure, is_embeddable, is_isomorphic, parse_structure)
from .logic import eval_formula, format_formula, parse_formula, quantifier_rank
from .eftypes import TypeFingerprint, equiv, fo_type, mso_type, structure_type
from .optrees import (AlphabetSpec, CographJoin, CustomOp, DisjointUnion, Node,
                      OpSymbol, TreeBuild, Value, WordConcat, clone_fresh, evaluate,
                      format_alphabet, format_tree, leaf, op_node, parse_alphabet,
                      parse_tree, subtree_replace)
from .automata import (TreeAutomaton, default_validity_automaton, parse_automaton,
                       trivial_automaton)
from .fvc import (Annotator, alphabet_digest, annotate, load_tables, save_tables,
                  soundness_check, verify_fvc)
from .reduction import (KernelCertificate, ReductionReport, ScaleReport, degree_reduce,
                        height_reduce, kernelize, scale_generate)
from .preservation import (CruxCertificate, DualityReport, PreservationVerdict,
                           duality_check, find_crux, geq_vertices_sentence,
                           is_existential_universal, is_universal_existential,
                           pce_check, prenex_shape, psc_check)

__version__ = "0.1.0"

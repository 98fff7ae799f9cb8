"""forestlab: an interactive forest-change analysis workbench.

Core layers: raster/mask I/O and geometry, mask analytics, rule-based
captioning, classical change detection, detection/caption metrics, dataset
manifests, a tool-orchestrating agent, an HTTP service, and a CLI.
"""

from . import errors
from .analytics import (ComponentLabeling, ConfusionCounts, MaskStats,
                        compare_masks, compute_stats, grid_cell_of,
                        label_components)
from .captions import (Caption, CaptionOrigin, CaptionSet, SEVERITY_LEVELS,
                       generate_rule_captions, load_template_table,
                       normalize_tokens, patchiness_word, severity_bucket)
from .datasets import (DEFAULT_TREE_KEYWORDS, Dataset, DatasetEntry,
                       DatasetStats, build_levir_trees_manifest,
                       convert_levir_captions, corpus_statistics,
                       discover_dataset, filter_tree_subset,
                       load_builtin_manifest, load_manifest, save_manifest)
from .metrics import (CaptionScores, EvalReport, SegScores, bleu, cider_d,
                      evaluate_dataset, iou_from_confusion, meteor_lite,
                      rouge_l)
from .perception import (DetectionParams, DetectionResult, Direction,
                         MorphOp, ScalarField, detect_changes,
                         drop_small_components, excess_green,
                         load_external_predictions, morph,
                         normalize_radiometry, otsu_threshold)
from .pipeline import evaluate_manifest, load_candidate_captions
from .raster import (ChangeMask, ClassDomain, ImagePair, Provenance, Raster,
                     binarize_mask, decode_mask, decode_raster,
                     load_image_pair, load_mask, load_raster,
                     render_comparison_overlay, resize_bilinear,
                     resize_mask_nearest, save_mask, save_raster)
from .synthetic import make_loss_pair

__version__ = "0.1.0"

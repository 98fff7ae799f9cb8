"""Detection and captioning metrics with corpus aggregation.

Segmentation: per-class IoU and mIoU from a single summed confusion matrix.
Captioning: corpus BLEU-1..4, ROUGE-L, an exact-match METEOR variant
(meteor_lite), and CIDEr-D. All caption metrics take pre-tokenized input:
candidates as token lists, references as groups of token lists.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .analytics import ConfusionCounts
from .errors import EmptyCorpus, EmptyInput, IdMismatch

CIDER_SIGMA = 6.0
ROUGE_BETA = 1.2

METEOR_LITE_NOTE = ("meteor_lite scores exact unigram matches only (no stemming or "
                    "synonymy) and are not comparable to full METEOR values")


@dataclass(frozen=True)
class SegScores:
    """Per-class IoU percentages; a class absent from both masks scores None."""
    miou: float
    iou_nc: float | None
    iou_c: float | None

    def to_dict(self) -> dict:
        return {"miou": self.miou, "iou_nc": self.iou_nc, "iou_c": self.iou_c}


@dataclass(frozen=True)
class CaptionScores:
    b1: float
    b2: float
    b3: float
    b4: float
    meteor: float
    rouge_l: float
    cider_d: float

    def to_dict(self) -> dict:
        return {"b1": self.b1, "b2": self.b2, "b3": self.b3, "b4": self.b4,
                "meteor": self.meteor, "rouge_l": self.rouge_l,
                "cider_d": self.cider_d}


@dataclass(frozen=True)
class EvalReport:
    dataset_id: str
    seg: SegScores | None = None
    cap: CaptionScores | None = None
    per_pair: dict | None = None
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def channels(self) -> list[str]:
        out = []
        if self.seg is not None:
            out.append("detection")
        if self.cap is not None:
            out.append("captioning")
        return out

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "channels": self.channels,
            "seg": self.seg.to_dict() if self.seg else None,
            "cap": self.cap.to_dict() if self.cap else None,
            "per_pair": self.per_pair,
            "notes": list(self.notes),
        }


# --- segmentation ---------------------------------------------------------------

def iou_from_confusion(c: ConfusionCounts) -> SegScores:
    """IoU per class and their mean, in percent.

    change IoU = tp/(tp+fp+fn); no-change IoU = tn/(tn+fp+fn). A class whose
    union is zero is undefined and excluded from the mean; if every class is
    undefined the mean is 100.
    """
    if c.total == 0:
        raise EmptyInput("confusion counts cover zero pixels")
    union_c = c.tp + c.fp + c.fn
    union_nc = c.tn + c.fp + c.fn
    iou_c = 100.0 * c.tp / union_c if union_c > 0 else None
    iou_nc = 100.0 * c.tn / union_nc if union_nc > 0 else None
    defined = [v for v in (iou_nc, iou_c) if v is not None]
    miou = sum(defined) / len(defined) if defined else 100.0
    return SegScores(miou=miou, iou_nc=iou_nc, iou_c=iou_c)


# --- shared caption helpers -------------------------------------------------------

def _ngrams(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def _validate_corpus(candidates, references):
    if len(candidates) != len(references):
        raise EmptyCorpus(f"{len(candidates)} candidates vs "
                          f"{len(references)} reference groups")
    if not candidates:
        raise EmptyCorpus("empty corpus")
    for i, refs in enumerate(references):
        if not refs:
            raise EmptyCorpus(f"reference group {i} is empty")


# --- BLEU -------------------------------------------------------------------------

def bleu(candidates, references, max_n: int = 4) -> tuple[float, ...]:
    """Corpus BLEU-1..max_n: clipped n-gram precision, geometric mean, and a
    brevity penalty from per-candidate closest reference lengths (ties favor
    the shorter reference). A zero precision at any order zeroes that order's
    score; there is no smoothing.
    """
    _validate_corpus(candidates, references)
    numer = [0] * max_n
    denom = [0] * max_n
    cand_len = 0
    ref_len = 0
    for cand, refs in zip(candidates, references):
        cand_len += len(cand)
        ref_len += min((len(r) for r in refs),
                       key=lambda length: (abs(length - len(cand)), length))
        for n in range(1, max_n + 1):
            counts = Counter(_ngrams(cand, n))
            max_ref: Counter = Counter()
            for ref in refs:
                for gram, cnt in Counter(_ngrams(ref, n)).items():
                    if cnt > max_ref[gram]:
                        max_ref[gram] = cnt
            denom[n - 1] += max(0, len(cand) - n + 1)
            numer[n - 1] += sum(min(cnt, max_ref[gram])
                                for gram, cnt in counts.items())

    if cand_len == 0:
        return tuple(0.0 for _ in range(max_n))
    bp = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)

    precisions = [numer[i] / denom[i] if denom[i] > 0 else 0.0 for i in range(max_n)]
    scores = []
    for k in range(1, max_n + 1):
        if any(precisions[i] == 0.0 for i in range(k)):
            scores.append(0.0)
        else:
            log_mean = sum(math.log(precisions[i]) for i in range(k)) / k
            scores.append(bp * math.exp(log_mean))
    return tuple(scores)


# --- ROUGE-L ----------------------------------------------------------------------

def _lcs_length(a, b) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def _rouge_l_pair(cand, refs) -> float:
    best = 0.0
    for ref in refs:
        lcs = _lcs_length(cand, ref)
        if lcs == 0 or not cand or not ref:
            continue
        p = lcs / len(cand)
        r = lcs / len(ref)
        f = ((1 + ROUGE_BETA ** 2) * p * r) / (r + ROUGE_BETA ** 2 * p)
        best = max(best, f)
    return best


def rouge_l(candidates, references) -> float:
    """Mean over candidates of the best LCS F-measure against each reference."""
    _validate_corpus(candidates, references)
    scores = [_rouge_l_pair(c, refs) for c, refs in zip(candidates, references)]
    return sum(scores) / len(scores)


# --- METEOR (exact-match variant) --------------------------------------------------

def _match_count(cand, ref) -> int:
    cc, rc = Counter(cand), Counter(ref)
    return sum(min(cnt, rc[w]) for w, cnt in cc.items())


def _min_chunks(cand, ref, m: int) -> int:
    """Minimum chunk count over all maximal one-to-one exact alignments.

    Searches candidate positions left to right; the used-reference bitmask
    determines matches so far, which keeps the memoization sound. Exact for
    the short sentences captions are made of.
    """
    positions: dict[str, list[int]] = defaultdict(list)
    for j, w in enumerate(ref):
        positions[w].append(j)
    n = len(cand)
    suffix_counts = [Counter() for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        suffix_counts[i] = suffix_counts[i + 1].copy()
        suffix_counts[i][cand[i]] += 1

    INF = math.inf
    memo: dict[tuple[int, int, int], float] = {}

    def feasible(i, used, needed) -> bool:
        # optimistic bound on additional matches from cand[i:]
        avail = 0
        for w, cnt in suffix_counts[i].items():
            free = sum(1 for j in positions.get(w, ()) if not used >> j & 1)
            avail += min(cnt, free)
            if avail >= needed:
                return True
        return avail >= needed

    def go(i, used, prev) -> float:
        matched = bin(used).count("1")
        needed = m - matched
        if needed == 0:
            return 0.0
        if i >= n or not feasible(i, used, needed):
            return INF
        key = (i, used, prev)
        if key in memo:
            return memo[key]
        best = go(i + 1, used, -2)  # leave cand[i] unmatched
        for j in positions.get(cand[i], ()):
            if used >> j & 1:
                continue
            start_cost = 0 if j == prev + 1 else 1
            sub = go(i + 1, used | (1 << j), j)
            if sub + start_cost < best:
                best = sub + start_cost
        memo[key] = best
        return best

    return int(go(0, 0, -2))


def _meteor_pair(cand, ref) -> float:
    m = _match_count(cand, ref)
    if m == 0 or not cand or not ref:
        return 0.0
    chunks = _min_chunks(list(cand), list(ref), m)
    p = m / len(cand)
    r = m / len(ref)
    f = 10.0 * p * r / (r + 9.0 * p)
    penalty = 0.5 * (chunks / m) ** 3
    return f * (1.0 - penalty)


def meteor_lite(candidates, references) -> float:
    """Exact-unigram METEOR: harmonic-mean F weighted toward recall, times a
    fragmentation penalty from the minimum chunk count. Per candidate, the
    best score over its references; corpus score is the mean.
    """
    _validate_corpus(candidates, references)
    scores = [max(_meteor_pair(c, ref) for ref in refs)
              for c, refs in zip(candidates, references)]
    return sum(scores) / len(scores)


# --- CIDEr-D ----------------------------------------------------------------------

def _count_ngrams_up_to(tokens, max_n):
    counts = [Counter() for _ in range(max_n)]
    for n in range(1, max_n + 1):
        counts[n - 1].update(_ngrams(tokens, n))
    return counts


def _cider_d_scores(candidates, references, max_n: int = 4,
                    sigma: float = CIDER_SIGMA) -> list[float]:
    corpus_size = len(references)
    df = [defaultdict(int) for _ in range(max_n)]
    for refs in references:
        for n in range(max_n):
            grams = set()
            for ref in refs:
                grams.update(_ngrams(ref, n + 1))
            for g in grams:
                df[n][g] += 1

    def idf(n, gram):
        return math.log(corpus_size / max(1, df[n][gram]))

    def tfidf_vec(tokens):
        counts = _count_ngrams_up_to(tokens, max_n)
        vecs, norms = [], []
        for n in range(max_n):
            v = {g: cnt * idf(n, g) for g, cnt in counts[n].items()}
            vecs.append(v)
            norms.append(math.sqrt(sum(x * x for x in v.values())))
        return vecs, norms

    scores = []
    for cand, refs in zip(candidates, references):
        cand_vecs, cand_norms = tfidf_vec(cand)
        acc = [0.0] * max_n
        for ref in refs:
            ref_vecs, ref_norms = tfidf_vec(ref)
            delta = len(cand) - len(ref)
            penalty = math.exp(-(delta * delta) / (2.0 * sigma * sigma))
            for n in range(max_n):
                if cand_norms[n] == 0.0 or ref_norms[n] == 0.0:
                    continue
                dot = sum(min(val, ref_vecs[n].get(g, 0.0)) * ref_vecs[n].get(g, 0.0)
                          for g, val in cand_vecs[n].items())
                acc[n] += dot / (cand_norms[n] * ref_norms[n]) * penalty
        per_n = [a / len(refs) * 10.0 for a in acc]
        scores.append(sum(per_n) / max_n)
    return scores


def cider_d(candidates, references) -> float:
    """Consensus tf-idf n-gram similarity with a gaussian length penalty.

    Document frequencies come from the evaluated corpus's reference groups
    (one document per group); candidate counts are clipped to reference
    counts, so the score peaks at 10 only when pair vocabularies are distinct.
    """
    _validate_corpus(candidates, references)
    scores = _cider_d_scores(candidates, references)
    return sum(scores) / len(scores)


# --- corpus evaluation --------------------------------------------------------------

def _check_aligned(ids_a, ids_b, context):
    sa, sb = set(ids_a), set(ids_b)
    if sa != sb:
        raise IdMismatch(sa ^ sb, context=context)


def evaluate_dataset(gt_masks=None, pred_masks=None,
                     ref_captions=None, cand_captions=None,
                     dataset_id: str = "dataset",
                     include_per_pair: bool = False) -> EvalReport:
    """Evaluate aligned per-pair inputs; either task channel may be absent.

    Segmentation aggregates one global confusion matrix over sorted pair ids;
    captioning runs the corpus metrics over the same ordering, so results do
    not depend on input map ordering.
    """
    from .analytics import compare_masks  # local import avoids cycle at module load

    seg_on = gt_masks is not None and pred_masks is not None
    cap_on = ref_captions is not None and cand_captions is not None
    if not seg_on and not cap_on:
        raise EmptyInput("no evaluation channel: provide masks and/or captions")

    notes = []
    per_pair: dict[str, dict] = {}

    seg = None
    if seg_on:
        _check_aligned(gt_masks, pred_masks, "gt vs predicted masks")
        if not gt_masks:
            raise EmptyInput("no mask pairs to evaluate")
        ids = sorted(gt_masks)
        total = ConfusionCounts(0, 0, 0, 0)
        for pid in ids:
            c = compare_masks(gt_masks[pid], pred_masks[pid])
            total = total + c
            if include_per_pair:
                union_c = c.tp + c.fp + c.fn
                per_pair.setdefault(pid, {})["iou_c"] = (
                    100.0 * c.tp / union_c if union_c > 0 else None)
        seg = iou_from_confusion(total)

    cap = None
    if cap_on:
        _check_aligned(ref_captions, cand_captions, "reference vs candidate captions")
        if not ref_captions:
            raise EmptyCorpus("no caption pairs to evaluate")
        if seg_on:
            _check_aligned(gt_masks, ref_captions, "masks vs captions")
        ids = sorted(ref_captions)
        cands = [list(cand_captions[pid]) for pid in ids]
        refs = [[list(r) for r in ref_captions[pid]] for pid in ids]
        b1, b2, b3, b4 = bleu(cands, refs)
        cider_scores = _cider_d_scores(cands, refs)
        rouge_scores = [_rouge_l_pair(c, r) for c, r in zip(cands, refs)]
        meteor_scores = [max(_meteor_pair(c, ref) for ref in r)
                         for c, r in zip(cands, refs)]
        cap = CaptionScores(
            b1=b1, b2=b2, b3=b3, b4=b4,
            meteor=sum(meteor_scores) / len(meteor_scores),
            rouge_l=sum(rouge_scores) / len(rouge_scores),
            cider_d=sum(cider_scores) / len(cider_scores),
        )
        notes.append(METEOR_LITE_NOTE)
        if include_per_pair:
            for pid, r_s, m_s, c_s in zip(ids, rouge_scores, meteor_scores,
                                          cider_scores):
                per_pair.setdefault(pid, {}).update(
                    rouge_l=r_s, meteor=m_s, cider_d=c_s)

    return EvalReport(dataset_id=dataset_id, seg=seg, cap=cap,
                      per_pair=per_pair if include_per_pair else None,
                      notes=tuple(notes))

"""Ablation walkthrough: the four desk-scale sweeps with rendered tables.

Run: python demos/05_ablations.py
"""

import tempfile
from pathlib import Path

from docprune import (
    FeaturizerConfig,
    IclDemonstration,
    LabeledExample,
    LabelerConfig,
    PromptTemplate,
    TrainConfig,
    label_documents,
    run_capacity_sweep,
    run_icl_comparison,
    run_prompt_robustness,
    run_ratio_sweep,
    split_train_val,
    train_classifier,
)
from docprune.ablation import labeled_texts, snippets_of
from docprune.classifier import featurize_text
from docprune.labeling import YES
from docprune.mocks import FidelityMockTransport, MockQualityTransport, VersionFlipTransport
from docprune.synthetic import SyntheticCorpusSpec, generate_documents, truth_by_doc

workdir = Path(tempfile.mkdtemp(prefix="docprune-demo-"))
config = LabelerConfig(model_name="mock", max_concurrent_requests=8)
template = PromptTemplate.for_version("V1")


def mock_labeled(docs):
    snips = snippets_of(docs)
    labels, _ = label_documents(snips, config, template, transport=MockQualityTransport())
    return labels, {s.doc_id: s.text for s in snips}, snips


# --- ratio sweep: kept-set precision/recall across keep ratios --------------
docs = generate_documents(SyntheticCorpusSpec(n_docs=3000, high_quality_fraction=0.25, seed=1))
labels, texts, snips = mock_labeled(docs[:1000])
featurizer = FeaturizerConfig(hash_bits=16)
examples = [
    LabeledExample(l.doc_id, featurize_text(texts[l.doc_id], featurizer),
                   1 if l.label == YES else 0)
    for l in labels
]
train, val = split_train_val(examples, 0.1, seed=0)
classifier = train_classifier(train, val, TrainConfig(featurizer=featurizer, seed=0))

ratio_report = run_ratio_sweep(docs, classifier)
print(ratio_report.render_text())
ratio_report.save(workdir, seed=1)

# --- capacity sweep: hashed capacity vs validation F1 -----------------------
# The many-phrase task needs bigram features and plenty of buckets, so small
# capacities visibly underperform.
many_docs = generate_documents(
    SyntheticCorpusSpec(n_docs=2000, high_quality_fraction=0.5, seed=2, marker_style="many")
)
many_labels, many_texts, _ = mock_labeled(many_docs)
capacity_report = run_capacity_sweep(
    labeled_texts(many_labels, many_texts), hash_bits_list=(10, 14, 18), seeds=(0, 1, 2)
)
print(capacity_report.render_text())
capacity_report.save(workdir, seed=2)

# --- prompt robustness: label agreement across instruction variants ---------
sample = snippets_of(docs[:2000])
drifting_labeler = VersionFlipTransport(flip_rate=0.05)
prompt_report = run_prompt_robustness(
    sample, config, {v: drifting_labeler for v in ("V1", "V2", "V3")}
)
print(prompt_report.render_text())
prompt_report.save(workdir, seed=1)

# --- in-context learning: a weak labeler with and without demonstrations ----
strong = truth_by_doc(docs)
demos = [IclDemonstration(s.text, strong[s.doc_id], "strong-reference") for s in sample[:5]]
weak = FidelityMockTransport({0: 0.60, 5: 0.75})
icl_report = run_icl_comparison(sample[5:], config, weak, demos, strong)
print(icl_report.render_text())
icl_report.save(workdir, seed=1)

print(f"report files in {workdir}")

"""Learnable label centers, class similarities and the nearest-neighbour head."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Optional

import numpy as np

from .corpus import hash_vectorize
from .encoder import EncoderParams, cosine_matrix, encode_batch
from .hierarchy import LabelTree, TemplateSpec, label_sentence

SCALE_FLOOR = 0.05
DEFAULT_REENCODE_EVERY = 500


@dataclass
class LabelSpace:
    """Label sentences and their centers ``U`` (one column per class).

    ``W`` holds pairwise cosine similarities of the columns of ``U`` as of the
    last re-encode; ``S`` is ``W`` clamped to ``[SCALE_FLOOR, 1]`` and is what
    scales the temperature of negative pairs.
    """

    sentences: list[str]
    U: np.ndarray
    W: np.ndarray
    S: np.ndarray
    reencode_every: int = DEFAULT_REENCODE_EVERY
    last_reencode_step: int = 0

    @property
    def num_classes(self) -> int:
        return self.U.shape[1]

    def copy(self) -> "LabelSpace":
        return replace(self, sentences=list(self.sentences), U=self.U.copy(),
                       W=self.W.copy(), S=self.S.copy())


def similarity_matrix(U: np.ndarray) -> np.ndarray:
    cols = np.asarray(U, dtype=np.float64).T
    W = cosine_matrix(cols, cols)
    W = 0.5 * (W + W.T)
    np.fill_diagonal(W, 1.0)
    return np.clip(W, -1.0, 1.0)


def scale_matrix(W: np.ndarray) -> np.ndarray:
    S = np.clip(W, SCALE_FLOOR, 1.0)
    np.fill_diagonal(S, 1.0)
    return S


def encode_sentences(encoder: EncoderParams, sentences: list[str]) -> np.ndarray:
    """Encode label sentences into a ``d x C`` matrix."""
    fvs = [hash_vectorize(s, encoder.E.shape[0]) for s in sentences]
    return encode_batch(encoder, fvs).T.copy()


def init_label_space(
    encoder: EncoderParams,
    tree: LabelTree,
    template: TemplateSpec,
    overrides: Optional[Mapping[int, str]] = None,
    reencode_every: int = DEFAULT_REENCODE_EVERY,
) -> LabelSpace:
    sentences = [label_sentence(tree, c, template, overrides) for c in range(tree.num_classes)]
    U = encode_sentences(encoder, sentences)
    W = similarity_matrix(U)
    return LabelSpace(sentences, U, W, scale_matrix(W), reencode_every, 0)


def reencode(labels: LabelSpace, encoder: EncoderParams, step: int) -> LabelSpace:
    """Overwrite ``U`` with fresh encodings once ``reencode_every`` steps have passed.

    Returns ``labels`` itself when nothing fires.
    """
    if step - labels.last_reencode_step < labels.reencode_every:
        return labels
    U = encode_sentences(encoder, labels.sentences)
    W = similarity_matrix(U)
    return replace(labels, U=U, W=W, S=scale_matrix(W), last_reencode_step=step)


def nn_scores(labels: LabelSpace, Z: np.ndarray) -> np.ndarray:
    return cosine_matrix(np.atleast_2d(Z), labels.U.T)


def nn_classify_batch(labels: LabelSpace, Z: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the smallest class index on ties
    return np.argmax(nn_scores(labels, Z), axis=1)


def nn_classify(labels: LabelSpace, z: np.ndarray) -> int:
    return int(nn_classify_batch(labels, z)[0])

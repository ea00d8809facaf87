"""
Triplet OOD score.

    score = c(s_ori_y)^alpha * c(s_ori_inp)^beta / c(s_inp_y),  c = clamp to [eps, 1]

Higher means more ID-like. Scores are raw; thresholds belong to evaluation.
"""
import math
from dataclasses import dataclass

import numpy as np

from embeddings.encoders import cosine, embed_image_visual, \
                                embed_image_vl, embed_text
from prompting.prompts import scoring_template

DROP_NONE = 'none'
DROP_CHOICES = (DROP_NONE, 's_ori_y', 's_inp_y', 's_ori_inp')


@dataclass(frozen=True)
class SimilarityTriplet:
    s_ori_y: float
    s_inp_y: float
    s_ori_inp: float

    def __post_init__(self):
        for value in (self.s_ori_y, self.s_inp_y, self.s_ori_inp):
            if not math.isfinite(value):
                raise ValueError(f'non-finite similarity in {self}')


@dataclass(frozen=True)
class ScoreParams:
    alpha: float = 2.0
    beta: float = 1.0
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError('alpha and beta must be non-negative')
        if not 0 < self.epsilon <= 1:
            raise ValueError('epsilon must be in (0, 1]')

    def clamp(self, value):
        return min(1.0, max(self.epsilon, value))


@dataclass(frozen=True)
class ScoredDetection:
    detection_id: str
    image_path: str
    label: str
    gt: str
    triplet: SimilarityTriplet
    score: float
    mode: str
    fingerprint: str
    seed: int
    mcm: float = None

    def to_dict(self):
        record = {
            'id': self.detection_id,
            'image_path': self.image_path,
            'label': self.label,
            's_ori_y': self.triplet.s_ori_y,
            's_inp_y': self.triplet.s_inp_y,
            's_ori_inp': self.triplet.s_ori_inp,
            'score': self.score,
            'gt': self.gt,
            'mode': self.mode,
            'fingerprint': self.fingerprint,
            'seed': self.seed,
        }
        if self.mcm is not None:
            record['mcm'] = self.mcm
        return record

    @classmethod
    def from_dict(cls, data):
        return cls(detection_id=data['id'],
                   image_path=data.get('image_path', ''),
                   label=data.get('label', ''),
                   gt=data['gt'],
                   triplet=SimilarityTriplet(data['s_ori_y'], data['s_inp_y'],
                                             data['s_ori_inp']),
                   score=data['score'],
                   mode=data.get('mode', ''),
                   fingerprint=data.get('fingerprint', ''),
                   seed=data.get('seed', 0),
                   mcm=data.get('mcm'))


def triplet_similarities(ori_crop, inp_crop, label, encoders, template=None):
    template = template or scoring_template()
    text = embed_text(label, template, encoders)
    ori_vl = embed_image_vl(ori_crop, encoders)
    inp_vl = embed_image_vl(inp_crop, encoders)
    return SimilarityTriplet(
        s_ori_y=cosine(ori_vl, text),
        s_inp_y=cosine(inp_vl, text),
        s_ori_inp=cosine(embed_image_visual(ori_crop, encoders),
                         embed_image_visual(inp_crop, encoders)))


def triplet_score(triplet, params):
    c = params.clamp
    return (c(triplet.s_ori_y) ** params.alpha
            * c(triplet.s_ori_inp) ** params.beta
            / c(triplet.s_inp_y))


def ablated_score(triplet, params, drop=DROP_NONE):
    """Triplet score with one component left out."""
    if drop == DROP_NONE:
        return triplet_score(triplet, params)
    if drop not in DROP_CHOICES:
        raise ValueError(f'unknown component {drop!r}')
    c = params.clamp
    ori_y = 1.0 if drop == 's_ori_y' else c(triplet.s_ori_y) ** params.alpha
    ori_inp = 1.0 if drop == 's_ori_inp' \
        else c(triplet.s_ori_inp) ** params.beta
    score = ori_y * ori_inp
    if drop != 's_inp_y':
        score /= c(triplet.s_inp_y)
    return score


def mcm_score(crop, id_labels, temperature, encoders, template=None):
    """Maximum softmax probability of the crop over the ID label texts."""
    template = template or scoring_template()
    if not id_labels:
        raise ValueError('mcm needs at least one ID label')
    image = embed_image_vl(crop, encoders)
    logits = np.array([cosine(image, embed_text(label, template, encoders))
                       for label in id_labels]) / temperature
    logits -= logits.max()
    probs = np.exp(logits)
    return float(probs.max() / probs.sum())

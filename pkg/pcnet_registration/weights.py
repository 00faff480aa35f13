# -*- coding: utf-8 -*-
"""pcnet-weights-v1 documents: bank geometry, alpha/beta/xi and the modulation kernels."""

import json

import numpy as np

from logzero import logger

from pcnet_registration.exceptions import WeightsFormatError
from pcnet_registration.gaborbank import BankConfig, make_bank
from pcnet_registration.pcnet import PCNet, PCParams

WEIGHTS_VERSION = 'pcnet-weights-v1'


def count_trainable(bank):
    """alpha + beta + every modulation entry."""
    return 2 + bank.modulation_size


def weights_to_dict(model):
    bank, params = model.bank, model.params
    return {
        'version': WEIGHTS_VERSION,
        'bank': bank.config.to_dict(),
        'params': {'alpha': params.alpha, 'beta': params.beta, 'xi': params.xi},
        'modulation': [[w.ravel().tolist() for w in scale] for scale in bank.modulation],
        'trainable_parameters': count_trainable(bank),
    }


def weights_from_dict(json_data, workers=None):
    try:
        version = json_data['version']
        bank_data = json_data['bank']
        params_data = json_data['params']
        modulation_data = json_data['modulation']
    except (KeyError, TypeError) as e:
        raise WeightsFormatError('Weights document is missing {0}'.format(e))
    if version != WEIGHTS_VERSION:
        raise WeightsFormatError('Unsupported weights version {0}, expected {1}'.format(version, WEIGHTS_VERSION))

    try:
        cfg = BankConfig.from_dict(bank_data)
        params = PCParams(alpha=float(params_data['alpha']), beta=float(params_data['beta']),
                          xi=float(params_data.get('xi', PCParams.xi)))
    except (KeyError, TypeError, ValueError) as e:
        raise WeightsFormatError('Invalid weights document: {0}'.format(e))

    bank = make_bank(cfg)
    if len(modulation_data) != cfg.n_scales:
        raise WeightsFormatError('Modulation lists {0} scales, bank has {1}'.format(len(modulation_data), cfg.n_scales))
    modulation = []
    for s, (scale, size) in enumerate(zip(modulation_data, cfg.kernel_sizes)):
        if len(scale) != cfg.n_orientations:
            raise WeightsFormatError('Scale {0} lists {1} orientations, expected {2}'
                                     .format(s, len(scale), cfg.n_orientations))
        kernels = []
        for o, flat in enumerate(scale):
            arr = np.asarray(flat, dtype=np.float64)
            if arr.size != size * size:
                raise WeightsFormatError('Modulation kernel (scale {0}, orientation {1}) has {2} entries, expected {3}'
                                         .format(s, o, arr.size, size * size))
            if not np.all(np.isfinite(arr)):
                raise WeightsFormatError('Modulation kernel (scale {0}, orientation {1}) is not finite'.format(s, o))
            kernels.append(arr.reshape(size, size))
        modulation.append(np.stack(kernels))

    declared = json_data.get('trainable_parameters')
    if declared is not None and declared != count_trainable(bank):
        logger.warning('Weights declare {0} trainable parameters, bank has {1}'.format(declared, count_trainable(bank)))
    return PCNet(bank.with_modulation(modulation), params, workers=workers)


def from_json_text(json_text, workers=None):
    try:
        json_data = json.loads(json_text)
    except ValueError as e:
        raise WeightsFormatError('Weights file is not valid JSON: {0}'.format(e))
    return weights_from_dict(json_data, workers=workers)


def save_weights(path, model):
    with open(str(path), 'w') as f:
        json.dump(weights_to_dict(model), f)
    logger.info('weights written to {0} ({1} trainable parameters)'.format(path, count_trainable(model.bank)))


def load_weights(path, workers=None):
    with open(str(path)) as f:
        return from_json_text(f.read(), workers=workers)

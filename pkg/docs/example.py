# -*- coding: utf-8 -*-

# Reduce the amount of logs:
import os
import logging
import logzero

logzero.loglevel(logging.WARN)

# import pcnet_registration
try:
    from pcnet_registration.imgcore import load_image, resample_affine, save_rgb
except ModuleNotFoundError as e:
    import sys
    sys.path.append("..")
    from pcnet_registration.imgcore import load_image, resample_affine, save_rgb
from pcnet_registration.metrics import aee
from pcnet_registration.pcnet import PCNet
from pcnet_registration.register import register
from pcnet_registration.synth import builtin_suite
from pcnet_registration.weights import load_weights

# Point PCNET_WEIGHTS at a tuned weights file (see `pcnet-reg tune`),
# which may be inflated from a .env file for example
# See https://github.com/theskumar/python-dotenv
try:
    from dotenv import load_dotenv, find_dotenv
    load_dotenv(find_dotenv())
except ModuleNotFoundError as e:
    print("dotenv is unavailable. Set PCNET_WEIGHTS as an environment "
          "variable to use tuned weights.")
logzero.loglevel(logging.INFO)

PCNET_WEIGHTS = os.environ.get("PCNET_WEIGHTS")

model = load_weights(PCNET_WEIGHTS) if PCNET_WEIGHTS else PCNet()

# per-orientation phase congruency maps of a synthetic image:
case = builtin_suite(seed=0, size=256, grades=('s',))[0]
features = model.enhance(case.ref)
print(features)  # FeatureStack(6 x 256x256)
print(features.composite().max())

# register the floating image onto the reference,
# and compare with the transform the pair was built with:
result = register(case.ref, case.flt, enhancer=model)
print(result.a_hat)
print('AEE: {0:.3f} px'.format(aee(case.a_gt, result.a_hat, 256, 256)))


# your own images work the same way:
def register_files(ref_path, flt_path, overlay_path='overlay.png'):
    ref, flt = load_image(ref_path), load_image(flt_path)
    result = register(ref, flt, enhancer=model)
    registered, _ = resample_affine(flt, result.a_hat)
    save_rgb(ref, registered, registered.data * 0.0, overlay_path)
    return result.a_hat

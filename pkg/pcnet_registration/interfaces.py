# -*- coding: utf-8 -*-

import abc


class FeatureEnhancerInterface(abc.ABC):
    @abc.abstractmethod
    def enhance(self, img):
        """Returns the FeatureStack registration works on."""
        pass


class TrainableInterface(abc.ABC):
    @abc.abstractmethod
    def trainable_values(self):
        """Returns (alpha, beta, flattened modulation W)."""
        pass

    @abc.abstractmethod
    def with_trainable_values(self, alpha, beta, modulation):
        """Returns a new model; the current one is left untouched."""
        pass

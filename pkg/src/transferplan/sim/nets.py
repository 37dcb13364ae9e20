"""Small feed-forward networks and the gradient-reversal operator."""

from __future__ import annotations

import math

import torch
from torch import nn
import torch.nn.functional as F


class _GradReverse(torch.autograd.Function):

    @staticmethod
    def forward(ctx, x, lam):
        ctx.lam = lam
        return x.view_as(x)

    @staticmethod
    def backward(ctx, grad):
        return -ctx.lam * grad, None


def grad_reverse(x: torch.Tensor, lam: float) -> torch.Tensor:
    """Identity on the forward pass; multiplies the gradient by ``-lam`` going back."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return _GradReverse.apply(x, float(lam))


def _init_linear(layer: nn.Linear, gen: torch.Generator) -> None:
    bound = 1 / math.sqrt(layer.in_features)
    with torch.no_grad():
        nn.init.uniform_(layer.weight, -bound, bound, generator=gen)
        nn.init.uniform_(layer.bias, -bound, bound, generator=gen)


class MLP(nn.Module):
    """ReLU multilayer perceptron; ``out_act`` applies ReLU after the last layer too."""

    def __init__(self, sizes, gen: torch.Generator, out_act: bool = False,
                 dtype=torch.float32):
        super().__init__()
        self.layers = nn.ModuleList(
            nn.Linear(a, b, dtype=dtype) for a, b in zip(sizes[:-1], sizes[1:]))
        for layer in self.layers:
            _init_linear(layer, gen)
        self.out_act = out_act

    def forward(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1 or self.out_act:
                x = F.relu(x)
        return x


def graph_reconstruction_loss(node_emb: torch.Tensor, domain_idx: torch.Tensor,
                              adjacency: torch.Tensor) -> torch.Tensor:
    """Mean BCE of sigmoid(<z_i, z_j>) against A[d_i, d_j] over cross-domain pairs i < j."""
    logits = node_emb @ node_emb.T
    target = adjacency[domain_idx][:, domain_idx].to(logits.dtype)
    n = len(domain_idx)
    upper = torch.triu(torch.ones(n, n, dtype=torch.bool), diagonal=1)
    mask = upper & (domain_idx[:, None] != domain_idx[None, :])
    return F.binary_cross_entropy_with_logits(logits[mask], target[mask])

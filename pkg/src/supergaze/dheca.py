"""Dual head-eye cross-attention (DHECA) and the ablation variants.

Both branches get a learned CLS token at index 0 and their own learned
positional table. A dual block updates the two branches in parallel from
the block's inputs::

    h = h + Attn(Q=LN_h(h), K,V=LN_e(e));   h = h + MLP(LN2_h(h))
    e = e + Attn(Q=LN_e(e), K,V=LN_h(h));   e = e + MLP(LN2_e(e))

Variants (attention-ablation rows):

* ``dheca``      bidirectional dual blocks (default)
* ``crossgaze``  only eye tokens query head tokens; head output is the
                 mean of head tokens
* ``self``       both branches concatenated through standard ViT blocks
* ``none``       max- and mean-pooled tokens per branch, no attention
"""

import math

import torch
from torch import nn

from .config import DhecaConfig
from .errors import ConfigurationError


def multihead_attention(q, k, v, heads):
    """Scaled dot-product attention over ``heads`` heads.

    ``q``: ``(B, Lq, C)``; ``k``, ``v``: ``(B, Lk, C)``. Returns the
    concatenated head outputs ``(B, Lq, C)`` and the weights
    ``(B, heads, Lq, Lk)``.
    """
    b, lq, c = q.shape
    lk = k.shape[1]
    dk = c // heads
    q = q.reshape(b, lq, heads, dk).transpose(1, 2)
    k = k.reshape(b, lk, heads, dk).transpose(1, 2)
    v = v.reshape(b, lk, heads, dk).transpose(1, 2)
    weights = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(dk), dim=-1)
    out = (weights @ v).transpose(1, 2).reshape(b, lq, c)
    return out, weights


class Mlp(nn.Module):
    def __init__(self, dim, hidden):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x):
        return self.fc2(self.act(self.fc1(x)))


class DualCrossAttentionBlock(nn.Module):
    def __init__(self, dim, heads, mlp_hidden):
        super().__init__()
        self.heads = heads
        self.norm_h = nn.LayerNorm(dim)
        self.norm_e = nn.LayerNorm(dim)
        self.qkv_h = nn.Linear(dim, 3 * dim)
        self.qkv_e = nn.Linear(dim, 3 * dim)
        self.proj_h = nn.Linear(dim, dim)
        self.proj_e = nn.Linear(dim, dim)
        self.norm2_h = nn.LayerNorm(dim)
        self.norm2_e = nn.LayerNorm(dim)
        self.mlp_h = Mlp(dim, mlp_hidden)
        self.mlp_e = Mlp(dim, mlp_hidden)

    def forward(self, head, eye):
        """Returns ``(head, eye, attention)``; attention maps are keyed by query branch."""
        q_h, k_h, v_h = self.qkv_h(self.norm_h(head)).chunk(3, dim=-1)
        q_e, k_e, v_e = self.qkv_e(self.norm_e(eye)).chunk(3, dim=-1)
        att_h, w_h = multihead_attention(q_h, k_e, v_e, self.heads)
        att_e, w_e = multihead_attention(q_e, k_h, v_h, self.heads)
        head = head + self.proj_h(att_h)
        eye = eye + self.proj_e(att_e)
        head = head + self.mlp_h(self.norm2_h(head))
        eye = eye + self.mlp_e(self.norm2_e(eye))
        return head, eye, {"head": w_h, "eye": w_e}


class EyeToHeadBlock(nn.Module):
    """Single-direction block: eye queries, head keys/values."""

    def __init__(self, dim, heads, mlp_hidden):
        super().__init__()
        self.heads = heads
        self.norm_h = nn.LayerNorm(dim)
        self.norm_e = nn.LayerNorm(dim)
        self.q_e = nn.Linear(dim, dim)
        self.kv_h = nn.Linear(dim, 2 * dim)
        self.proj_e = nn.Linear(dim, dim)
        self.norm2_e = nn.LayerNorm(dim)
        self.mlp_e = Mlp(dim, mlp_hidden)

    def forward(self, head, eye):
        k_h, v_h = self.kv_h(self.norm_h(head)).chunk(2, dim=-1)
        att, w = multihead_attention(self.q_e(self.norm_e(eye)), k_h, v_h, self.heads)
        eye = eye + self.proj_e(att)
        eye = eye + self.mlp_e(self.norm2_e(eye))
        return head, eye, {"eye": w}


class SelfAttentionBlock(nn.Module):
    """Standard pre-norm ViT block."""

    def __init__(self, dim, heads, mlp_hidden):
        super().__init__()
        self.heads = heads
        self.norm1 = nn.LayerNorm(dim)
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, mlp_hidden)

    def forward(self, x):
        q, k, v = self.qkv(self.norm1(x)).chunk(3, dim=-1)
        att, w = multihead_attention(q, k, v, self.heads)
        x = x + self.proj(att)
        x = x + self.mlp(self.norm2(x))
        return x, {"joint": w}


_BLOCKS = {"dheca": DualCrossAttentionBlock, "crossgaze": EyeToHeadBlock, "self": SelfAttentionBlock}


class Dheca(nn.Module):
    """Attention stack mapping head/eye tokens to two summary vectors.

    ``head_len`` and ``eye_len`` are the token counts before CLS; they fix
    the positional table sizes.
    """

    def __init__(self, cfg: DhecaConfig, head_len, eye_len):
        super().__init__()
        self.cfg = cfg
        self.head_len = head_len
        self.eye_len = eye_len
        c = cfg.dim
        if cfg.variant == "none":
            self.out_dim = 4 * c
            self.blocks = nn.ModuleList()
            return
        self.out_dim = 2 * c
        self.cls_head = nn.Parameter(torch.zeros(1, 1, c))
        self.cls_eye = nn.Parameter(torch.zeros(1, 1, c))
        self.pos_head = nn.Parameter(torch.zeros(1, head_len + 1, c))
        self.pos_eye = nn.Parameter(torch.zeros(1, eye_len + 1, c))
        for p in (self.cls_head, self.cls_eye, self.pos_head, self.pos_eye):
            nn.init.trunc_normal_(p, std=0.02)
        block = _BLOCKS[cfg.variant]
        self.blocks = nn.ModuleList(block(c, cfg.heads, cfg.mlp_hidden) for _ in range(cfg.depth))

    def attach_cls_and_pos(self, head, eye):
        """Prepend each branch's CLS token and add its positional table."""
        if head.shape[-1] != eye.shape[-1] or head.shape[-1] != self.cfg.dim:
            raise ConfigurationError(
                f"token widths differ: head {head.shape[-1]}, eye {eye.shape[-1]}, config {self.cfg.dim}")
        if head.shape[1] != self.head_len or eye.shape[1] != self.eye_len:
            raise ConfigurationError(
                f"expected {self.head_len} head / {self.eye_len} eye tokens, "
                f"got {head.shape[1]} / {eye.shape[1]}")
        b = head.shape[0]
        head = torch.cat([self.cls_head.expand(b, -1, -1).to(head.dtype), head], dim=1) + self.pos_head
        eye = torch.cat([self.cls_eye.expand(b, -1, -1).to(eye.dtype), eye], dim=1) + self.pos_eye
        return head, eye

    def forward(self, head, eye, return_attention=False):
        """``(B, Lh, C)``, ``(B, Le, C)`` -> two summary vectors ``(B, out_dim // 2)``."""
        attention = []
        variant = self.cfg.variant
        if variant == "none":
            if head.shape[-1] != eye.shape[-1]:
                raise ConfigurationError("head and eye token widths differ")
            h = torch.cat([head.amax(dim=1), head.mean(dim=1)], dim=-1)
            e = torch.cat([eye.amax(dim=1), eye.mean(dim=1)], dim=-1)
            out = (h, e)
        else:
            head, eye = self.attach_cls_and_pos(head, eye)
            if variant == "self":
                lh = head.shape[1]
                x = torch.cat([head, eye], dim=1)
                for blk in self.blocks:
                    x, w = blk(x)
                    attention.append(w)
                out = (x[:, 0], x[:, lh])
            else:
                for blk in self.blocks:
                    head, eye, w = blk(head, eye)
                    attention.append(w)
                if variant == "crossgaze":
                    out = (head[:, 1:].mean(dim=1), eye[:, 0])
                else:
                    out = (head[:, 0], eye[:, 0])
        if return_attention:
            return out, attention
        return out

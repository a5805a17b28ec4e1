"""Look inside the dual head-eye attention of an untrained toy model.

Each block returns the softmax weights of both directions: head queries
over eye keys, and eye queries over head keys.
"""
import torch

from supergaze.config import DhecaConfig, ModelConfig
from supergaze.model import GazeModel

torch.manual_seed(0)
cfg = ModelConfig(backbone="toy", pretrained=False, dheca=DhecaConfig(depth=2, dim=32, heads=4))
model = GazeModel(cfg).eval()
print(model.head_len, model.eye_len)
print(sum(p.numel() for p in model.parameters()))

heads = torch.rand(1, cfg.head_images, 3, 224, 224)
eyes = torch.rand(1, cfg.eye_images, 3, 64, 64)
with torch.no_grad():
    h_tok, e_tok = model.tokens(heads, eyes)
    (h_cls, e_cls), attention = model.dheca(h_tok, e_tok, return_attention=True)

for i, w in enumerate(attention):
    print(i, tuple(w["head"].shape), tuple(w["eye"].shape))

# where does the head CLS token look among the eye tokens (averaged over heads)?
print(attention[-1]["head"][0, :, 0].mean(0))

with torch.no_grad():
    print(model(heads, eyes))

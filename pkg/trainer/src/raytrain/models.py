"""Generator and discriminator networks.

The generator is a convolutional encoder-decoder with skip connections,
four levels down and four up; the conditioning raster (plus an optional
broadcast noise channel) goes in, a normalized heatmap comes out at the
same spatial size.  The discriminator scores (raster, heatmap) pairs.
"""
from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

RASTER_CHANNELS = 3


def _down(cin, cout):
    return nn.Sequential(
        nn.Conv2d(cin, cout, 4, stride=2, padding=1),
        nn.LeakyReLU(0.2, inplace=True),
    )


def _up(cin, cout):
    return nn.Sequential(
        nn.ConvTranspose2d(cin, cout, 4, stride=2, padding=1),
        nn.ReLU(inplace=True),
    )


class Generator(nn.Module):
    def __init__(self, noise_channels: int = 1, base: int = 16):
        super().__init__()
        self.noise_channels = noise_channels
        cin = RASTER_CHANNELS + noise_channels
        b = base
        self.d1 = _down(cin, b)
        self.d2 = _down(b, 2 * b)
        self.d3 = _down(2 * b, 4 * b)
        self.d4 = _down(4 * b, 8 * b)
        self.u4 = _up(8 * b, 4 * b)
        self.u3 = _up(8 * b, 2 * b)
        self.u2 = _up(4 * b, b)
        self.u1 = _up(2 * b, b)
        self.head = nn.Conv2d(b + cin, 1, 3, padding=1)

    def forward(self, raster: torch.Tensor, noise: torch.Tensor | None = None):
        """raster: (B, 3, H, W); noise: (B, noise_channels, H, W) or None."""
        if self.noise_channels:
            if noise is None:
                raise ValueError("generator was built with noise input; none given")
            x = torch.cat([raster, noise], dim=1)
        else:
            if noise is not None and noise.shape[1] != 0:
                raise ValueError("generator was built without noise input")
            x = raster
        s1 = self.d1(x)
        s2 = self.d2(s1)
        s3 = self.d3(s2)
        s4 = self.d4(s3)
        y = _match(self.u4(s4), s3)
        y = _match(self.u3(torch.cat([y, s3], dim=1)), s2)
        y = _match(self.u2(torch.cat([y, s2], dim=1)), s1)
        y = _match(self.u1(torch.cat([y, s1], dim=1)), x)
        return torch.sigmoid(self.head(torch.cat([y, x], dim=1)))


def _match(t: torch.Tensor, ref: torch.Tensor) -> torch.Tensor:
    if t.shape[-2:] != ref.shape[-2:]:
        t = F.interpolate(t, size=ref.shape[-2:], mode="nearest")
    return t


class Discriminator(nn.Module):
    """Conditional critic: scores a heatmap given its conditioning raster."""

    def __init__(self, base: int = 16):
        super().__init__()
        b = base
        self.net = nn.Sequential(
            _down(RASTER_CHANNELS + 1, b),
            _down(b, 2 * b),
            _down(2 * b, 4 * b),
            nn.Conv2d(4 * b, 1, 3, padding=1),
        )

    def forward(self, raster: torch.Tensor, heatmap: torch.Tensor) -> torch.Tensor:
        """Returns per-sample scores in (0, 1), shape (B,)."""
        logits = self.net(torch.cat([raster, heatmap], dim=1))
        return torch.sigmoid(logits.mean(dim=(1, 2, 3)))

"""Regenerates the road-scene fixture images used by the adaptation tests."""
import numpy as np
from PIL import Image

W, H = 128, 96


def lerp(a, b, t):
    return np.asarray(a)[None, None, :] * (1 - t[..., None]) + np.asarray(b)[None, None, :] * t[..., None]


def scene(rng, horizon, palette, cars, sun=None):
    yy, xx = np.mgrid[0:H, 0:W].astype(float)
    img = np.zeros((H, W, 3))
    sky = yy < horizon
    img[sky] = lerp(palette["sky_top"], palette["sky_low"], yy / horizon)[sky]
    if sun is not None:
        cx, cy, r = sun
        d = np.hypot(xx - cx, yy - cy)
        glow = np.clip(1 - d / (3 * r), 0, 1) ** 2
        img[sky] = (img * (1 - glow[..., None]) + np.asarray(palette["sun"]) * glow[..., None])[sky]
        img[(d < r) & sky] = palette["sun"]
    hills = (yy >= horizon - 6 - 4 * np.sin(xx / 9.0)) & (yy < horizon + 2)
    img[hills] = palette["hills"]
    ground = yy >= horizon + 2
    img[ground] = palette["grass"]
    depth = (yy - horizon) / (H - horizon)
    half = 4 + depth * W * 0.45
    road = ground & (np.abs(xx - W / 2) < half)
    img[road] = lerp(palette["road_far"], palette["road_near"], np.clip(depth, 0, 1))[road]
    lane = road & (np.abs(xx - W / 2) < 0.5 + depth * 1.5) & ((yy.astype(int) // 5) % 2 == 0)
    img[lane] = palette["lane"]
    for x0, y0, w, h, c in cars:
        img[y0:y0 + h, x0:x0 + w] = c
        img[y0 + h - 2:y0 + h, x0:x0 + w] = palette["shadow"]
    img += rng.normal(0, 0.02, img.shape)
    return (np.clip(img, 0, 1) * 255 + 0.5).astype(np.uint8)


DAY = dict(sky_top=(0.35, 0.6, 0.92), sky_low=(0.75, 0.87, 0.97), hills=(0.3, 0.45, 0.35), grass=(0.3, 0.6, 0.25),
           road_far=(0.55, 0.55, 0.57), road_near=(0.4, 0.4, 0.42), lane=(0.95, 0.95, 0.92), shadow=(0.15, 0.15, 0.15))
SUNSET = dict(sky_top=(0.3, 0.18, 0.42), sky_low=(0.98, 0.55, 0.25), hills=(0.25, 0.15, 0.2), grass=(0.3, 0.25, 0.15),
              road_far=(0.35, 0.27, 0.3), road_near=(0.2, 0.15, 0.18), lane=(0.95, 0.7, 0.45), shadow=(0.08, 0.05, 0.06),
              sun=(1.0, 0.85, 0.5))

if __name__ == "__main__":
    import os
    here = os.path.dirname(os.path.abspath(__file__))
    rng = np.random.default_rng(2024)
    day = scene(rng, 40, DAY, [(50, 60, 14, 9, (0.8, 0.15, 0.15)), (72, 52, 9, 6, (0.15, 0.25, 0.75))])
    sunset = scene(rng, 44, SUNSET, [(58, 62, 14, 9, (0.35, 0.1, 0.1))], sun=(90, 36, 7))
    day_test = scene(rng, 40, DAY, [(44, 64, 15, 9, (0.8, 0.15, 0.15)), (74, 50, 8, 5, (0.15, 0.25, 0.75))])
    Image.fromarray(day).save(os.path.join(here, "day_source.png"))
    Image.fromarray(sunset).save(os.path.join(here, "sunset_target.png"))
    Image.fromarray(day_test).save(os.path.join(here, "day_test.png"))
    Image.fromarray(np.array([[[255, 0, 0]]], dtype=np.uint8)).save(os.path.join(here, "red_1x1.png"))
    Image.fromarray(np.zeros((2, 2, 3), dtype=np.uint8)).save(os.path.join(here, "black_2x2.png"))
    Image.fromarray(np.array([[[10, 20, 30, 255], [40, 50, 60, 0]]], dtype=np.uint8), "RGBA").save(
        os.path.join(here, "rgba_2x1.png"))
    Image.fromarray(np.full((2, 2), 128, dtype=np.uint8), "L").save(os.path.join(here, "grey_2x2.png"))
    Image.fromarray(np.full((2, 2), 1000, dtype=np.uint16)).save(os.path.join(here, "grey16_2x2.png"))

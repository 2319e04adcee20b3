"""Hand-specified expected frame for the MiniDeathmatch render test.

Scene: default map, agent at column 9, row 9 facing north, one melee enemy
three cells straight ahead. The 7-wide, 10-deep window then holds hall floor
at depths 1-8, the top wall at depth 9 and off-map wall at depth 10.
Raster 30x40: window depth 10 on the top rows, depth 1 at the bottom; the
7 window columns span the 40 pixel columns left to right.
"""
import pathlib

WALL, HALL, MELEE = 60, 120, 235
H, W, DEPTH, WIDTH = 30, 40, 10, 7


def cell_level(depth, lateral):
    if depth >= 9:
        return WALL
    if depth == 3 and lateral == 0:
        return MELEE
    return HALL


pixels = bytearray()
for py in range(H):
    depth = DEPTH - (py * DEPTH) // H
    for px in range(W):
        lateral = (px * WIDTH) // W - WIDTH // 2
        pixels.append(cell_level(depth, lateral))

out = pathlib.Path(__file__).resolve().parent.parent / "deathmatch_enemy_ahead.pgm"
out.write_bytes(b"P5\n%d %d\n255\n" % (W, H) + bytes(pixels))
print("wrote", out)

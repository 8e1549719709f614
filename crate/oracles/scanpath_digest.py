"""SHA-256 of the canonical record file for 100 formula-generated scanpaths.

Scanpath i (0..100): subject "subj-{i%7:03}", emotion ordinal i%6,
scene "scene-{i%13:04}", 1 + i%9 fixations. Fixation j: u = ((37i + 11j)
mod 7680) / 4, v = ((53i + 29j) mod 3840) / 4, size 1920x960,
t_start = 0.5 j, duration = 0.25 (1 + j mod 3), target j only when j is even.
One compact JSON object per line, fields in declaration order.
"""
import hashlib
import json

lines = []
for i in range(100):
    fix = []
    for j in range(1 + i % 9):
        f = {
            "point": {"u": ((37 * i + 11 * j) % 7680) / 4, "v": ((53 * i + 29 * j) % 3840) / 4,
                      "size": {"width": 1920, "height": 960}},
            "t_start": 0.5 * j,
            "duration": 0.25 * (1 + j % 3),
        }
        if j % 2 == 0:
            f["target"] = j
        fix.append(f)
    rec = {"subject_id": f"subj-{i % 7:03}", "emotion": i % 6, "scene_id": f"scene-{i % 13:04}",
           "fixations": fix}
    lines.append(json.dumps(rec, separators=(",", ":")))
text = "\n".join(lines) + "\n"
print(hashlib.sha256(text.encode()).hexdigest())

"""Writes phoenix_4x5.bin: a small Phoenix-format chip with a padded
Phoenix header, a native header and a phase block after the magnitudes."""

import struct

ROWS, COLS = 4, 5
NATIVE = b"NATIVE-HEADER-BYTES\x00\x01\x02\x03"

magnitude = [0.0, 1.5, 0.001, 3.25e-3, 7.0,
             0.125, 0.0625, 2.0 ** -20, 12.75, 0.333,
             1e-7, 4096.0, 0.5, 0.75, 0.875,
             0.01, 0.02, 0.03, 0.04, 99.5]
phase = [-3.0 + 0.3 * i for i in range(ROWS * COLS)]


def header(length):
    lines = [
        "[PhoenixHeaderVer01.04]",
        f"PhoenixHeaderLength= {length:08d}",
        f"native_header_length= {len(NATIVE):08d}",
        f"NumberOfColumns= {COLS}",
        f"NumberOfRows= {ROWS}",
        "TargetType= bmp2_tank",
        "TargetSerNum= 9563",
        "DesiredDepression= 15",
        "MeasuredDepression= 17.0",
        "Filename= HB03333.015",
        "[EndofPhoenixHeader]",
    ]
    return ("\n".join(lines) + "\n").encode("ascii")


length = 512
text = header(length)
assert len(text) <= length
blob = text + b" " * (length - len(text)) + NATIVE
blob += b"".join(struct.pack(">f", v) for v in magnitude)
blob += b"".join(struct.pack(">f", v) for v in phase)

with open("phoenix_4x5.bin", "wb") as f:
    f.write(blob)

for v in magnitude:
    print(hex(struct.unpack(">I", struct.pack(">f", v))[0]))

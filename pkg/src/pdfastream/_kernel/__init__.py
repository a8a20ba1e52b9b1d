"""Sketch kernel backend selection.

Prefers the compiled Cython extension; falls back to the pure-Python
implementation when the extension is missing or ``PDFASTREAM_PURE=1``
is set. Both expose the same API and produce bit-identical results.
"""
import os

from . import pure

if os.environ.get("PDFASTREAM_PURE") == "1":
    _impl = pure
else:
    try:
        from . import _cms as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = pure

BACKEND = _impl.BACKEND
MASK64 = pure.MASK64
FNV_OFFSET = pure.FNV_OFFSET
FNV_PRIME = pure.FNV_PRIME
SIG_TAG = pure.SIG_TAG

RawSketch = _impl.RawSketch
fingerprint = _impl.fingerprint
row_index = _impl.row_index
trace_layer_fps = _impl.trace_layer_fps
minhash_signature = _impl.minhash_signature
signature_fingerprint = _impl.signature_fingerprint
trace_minhash_fps = _impl.trace_minhash_fps

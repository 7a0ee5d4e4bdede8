"""Compress image datasets into sinusoidal implicit neural representations."""

from ._rinr import (
    Architecture,
    ArchiveRecord,
    DatasetArchive,
    EncodeConfig,
    EncodeReport,
    Error,
    FormatError,
    InrModel,
    IntegrityError,
    InvalidInput,
    IoError,
    NumericError,
    QuantMode,
    StructuralError,
    TrainingError,
    decode,
    deserialize,
    dequantize,
    dynamic_prune,
    dynamic_ratio,
    encode_dataset,
    enumerate_archs,
    fit_full,
    fit_round1,
    init,
    load_image,
    prune,
    psnr,
    quantize,
    read_file,
    save_png,
    serialize,
    stats,
    sweep,
    write_file,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"

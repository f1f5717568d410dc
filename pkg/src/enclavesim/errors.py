"""Shared exception types for the simulator core."""


class EnclaveSimError(Exception):
    """Base class for all simulator-defined errors."""


class NotSM(EnclaveSimError):
    """A configuration surface reserved to the security monitor was called
    by some other identity."""


class UnmappedAddress(EnclaveSimError):
    """Transaction target is outside main memory and every MMIO window."""


class DeviceUnbound(EnclaveSimError):
    """A DMA transfer was requested on a device with no DMA port at all.

    Note: a dma-capable device that is merely not bound to an enclave is not
    an error case; its transactions are denied (redirected) wholesale.
    """


class TranslationFault(EnclaveSimError):
    """Page-table walk failed: unmapped page, permission mismatch, or a walk
    transaction that the bus redirected."""

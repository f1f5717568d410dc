"""Two-level page tables for user-space enclaves.

4 KiB pages, 32-bit virtual addresses split 10/10/12. Entries are 4 bytes:
physical page number in the top 20 bits, permission flags in the low bits.
Root entries are pointers (valid bit only); leaves live in the second level.

The tables themselves live inside the enclave region in a dedicated area so
the monitor can bound-check every pointer during verification. Walks read
table memory through a caller-supplied loader, which lets the machine route
them over the bus (and thus through the cache) like any other access.
"""

import struct

from .errors import TranslationFault

PAGE_BYTES = 4096
PAGE_SHIFT = 12
ENTRIES_PER_TABLE = 1024
PTE_BYTES = 4

PTE_VALID = 0x1
PTE_READ = 0x2
PTE_WRITE = 0x4
PTE_EXEC = 0x8

_PERM_BIT = {"r": PTE_READ, "w": PTE_WRITE, "x": PTE_EXEC}


def make_pte(ppn, flags):
    if not 0 <= ppn < (1 << 20):
        raise ValueError("physical page number out of range")
    return (ppn << PAGE_SHIFT) | (flags & 0xF)


def pte_ppn(value):
    return value >> PAGE_SHIFT


def pte_flags(value):
    return value & 0xF


def split_va(va):
    if not 0 <= va < (1 << 32):
        raise TranslationFault(f"virtual address {va:#x} out of range")
    return (va >> 22) & 0x3FF, (va >> PAGE_SHIFT) & 0x3FF, va & (PAGE_BYTES - 1)


def table_area_bytes(region_size):
    """Root table plus one second-level table per 4 MiB of address span."""
    l2_count = max(1, -(-region_size // (ENTRIES_PER_TABLE * PAGE_BYTES)))
    return PAGE_BYTES * (1 + l2_count)


def materialize_linear_tables(memory, pt_base, region_base, region_size,
                              skip_ranges=()):
    """Build tables mapping VA offset i*4096 -> region_base + i*4096, RWX.

    Pages whose physical address intersects a skip range (the table area
    itself) are left unmapped, so the enclave cannot rewrite its own tables
    directly; updates must go through the monitor.
    """
    n_pages = region_size // PAGE_BYTES
    l2_count = max(1, -(-n_pages // ENTRIES_PER_TABLE))
    root = bytearray(PAGE_BYTES)
    for i in range(l2_count):
        l2_base = pt_base + PAGE_BYTES * (1 + i)
        struct.pack_into("<I", root, i * PTE_BYTES,
                         make_pte(l2_base >> PAGE_SHIFT, PTE_VALID))
    memory.write(pt_base, bytes(root))

    for i in range(l2_count):
        table = bytearray(PAGE_BYTES)
        for j in range(ENTRIES_PER_TABLE):
            page_index = i * ENTRIES_PER_TABLE + j
            if page_index >= n_pages:
                break
            pa = region_base + page_index * PAGE_BYTES
            if any(start <= pa < end for start, end in skip_ranges):
                continue
            struct.pack_into("<I", table, j * PTE_BYTES,
                             make_pte(pa >> PAGE_SHIFT,
                                      PTE_VALID | PTE_READ | PTE_WRITE | PTE_EXEC))
        memory.write(pt_base + PAGE_BYTES * (1 + i), bytes(table))


def walk(load_u32, pt_base, va, perm):
    """Translate one virtual address. perm is 'r', 'w' or 'x'."""
    vpn1, vpn0, offset = split_va(va)
    root_entry = load_u32(pt_base + vpn1 * PTE_BYTES)
    if not root_entry & PTE_VALID:
        raise TranslationFault(f"no second-level table for {va:#x}")
    l2_base = pte_ppn(root_entry) << PAGE_SHIFT
    entry = load_u32(l2_base + vpn0 * PTE_BYTES)
    if not entry & PTE_VALID:
        raise TranslationFault(f"page not present for {va:#x}")
    if not entry & _PERM_BIT[perm]:
        raise TranslationFault(f"{perm} access denied at {va:#x}")
    return (pte_ppn(entry) << PAGE_SHIFT) | offset


def iter_mappings(read_u32, pt_base):
    """Yield (va, pte_value) for every valid leaf, plus ('table', l2_base)
    markers for each live second-level table. Used by verification."""
    for vpn1 in range(ENTRIES_PER_TABLE):
        root_entry = read_u32(pt_base + vpn1 * PTE_BYTES)
        if not root_entry & PTE_VALID:
            continue
        l2_base = pte_ppn(root_entry) << PAGE_SHIFT
        yield ("table", l2_base)
        for vpn0 in range(ENTRIES_PER_TABLE):
            entry = read_u32(l2_base + vpn0 * PTE_BYTES)
            if entry & PTE_VALID:
                va = (vpn1 << 22) | (vpn0 << PAGE_SHIFT)
                yield (va, entry)

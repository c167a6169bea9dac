from typing import List, Sequence, Union, overload


class WindowPartition(Sequence[range]):
    r"""
    Consecutive non-overlapping windows of ``size`` samples covering ``length`` samples.

    The final window is shorter when ``size`` does not divide ``length``.
    Each window is a :py:class:`range` of sample indexes.

    .. code-block:: python3

        >>> w = WindowPartition(5, 3)
        >>> list(w)
        [range(0, 3), range(3, 5)]
        >>> len(w), w.size, w.length
        (2, 3, 5)

    :meth:`for_budget` picks the smallest window size that yields at most ``budget`` windows.

    .. code-block:: python3

        >>> WindowPartition.for_budget(3000, 1024).size
        3
        >>> len(WindowPartition.for_budget(3000, 1024))
        1000
        >>> WindowPartition.for_budget(178, 1024).size
        1

    :attr:`complete` counts only full-size windows and :attr:`remainder` is the number of samples left over
    in the short final window, so ``complete * size + remainder == length`` always holds.

    .. code-block:: python3

        >>> w = WindowPartition(9001, 3000)
        >>> w.complete, w.remainder
        (3, 1)

    Partitions are hashable and equatable.

    .. code-block:: python3

        >>> WindowPartition(10, 5) == WindowPartition(10, 5)
        True
        >>> WindowPartition(10, 5) in {WindowPartition(10, 2)}
        False

    Args:
        length: number of samples being partitioned
        size: window size in samples
    """

    __slots__ = ("_length", "_size")

    def __init__(self, length: int, size: int) -> None:
        if not isinstance(length, int) or not isinstance(size, int):
            raise TypeError("length and size must be integers")
        if length < 0:
            raise ValueError(f"length must be non-negative, not {length}")
        if size < 1:
            raise ValueError(f"window size must be positive, not {size}")
        self._length = length
        self._size = size

    @classmethod
    def for_budget(cls, length: int, budget: int) -> "WindowPartition":
        """Partition ``length`` samples into at most ``budget`` windows of size ``ceil(length / budget)``"""
        if budget < 1:
            raise ValueError(f"budget must be positive, not {budget}")
        return cls(length, max(1, -(-length // budget)))

    @property
    def length(self) -> int:
        """Number of samples covered"""
        return self._length

    @property
    def size(self) -> int:
        """Size of every window but possibly the last"""
        return self._size

    @property
    def starts(self) -> range:
        """First sample index of every window"""
        return range(0, self._length, self._size)

    @property
    def complete(self) -> int:
        """Number of full-size windows"""
        return self._length // self._size

    @property
    def remainder(self) -> int:
        """Samples in the trailing short window, zero when the size divides the length"""
        return self._length % self._size

    def __len__(self) -> int:
        return len(self.starts)

    @overload
    def __getitem__(self, item: int) -> range:
        ...

    @overload
    def __getitem__(self, item: slice) -> List[range]:
        ...

    def __getitem__(self, item: Union[int, slice]) -> Union[range, List[range]]:
        if isinstance(item, int):
            start = self.starts[item]
            return range(start, min(start + self._size, self._length))
        elif isinstance(item, slice):
            return [self[i] for i in range(len(self))[item]]
        else:
            raise TypeError(
                "indices must be integers or slices, not {}".format(
                    type(item).__qualname__
                )
            )

    def __eq__(self, other: object) -> bool:
        if isinstance(other, type(self)):
            return (self._length, self._size) == (other._length, other._size)
        else:
            return NotImplemented

    def __hash__(self) -> int:
        return hash((self._length, self._size))

    def __repr__(self) -> str:
        return f"{type(self).__qualname__}({self._length!r}, {self._size!r})"
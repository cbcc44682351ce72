"""Pure-Python std::seed_seq and std::mt19937_64, for oracle use."""

M32 = 0xFFFFFFFF
M64 = 0xFFFFFFFFFFFFFFFF


def seed_seq_generate(v, n):
    out = [0x8B8B8B8B] * n
    s = len(v)
    t = 11 if n >= 623 else 7 if n >= 68 else 5 if n >= 39 else 3 if n >= 7 else (n - 1) // 2
    p = (n - t) // 2
    q = p + t
    m = max(s + 1, n)

    def T(x):
        return x ^ (x >> 27)

    for k in range(m):
        r1 = (1664525 * T(out[k % n] ^ out[(k + p) % n] ^ out[(k - 1) % n])) & M32
        if k == 0:
            r2 = r1 + s
        elif k <= s:
            r2 = r1 + k % n + v[k - 1]
        else:
            r2 = r1 + k % n
        r2 &= M32
        out[(k + p) % n] = (out[(k + p) % n] + r1) & M32
        out[(k + q) % n] = (out[(k + q) % n] + r2) & M32
        out[k % n] = r2
    for k in range(m, m + n):
        r3 = (1566083941 * T((out[k % n] + out[(k + p) % n] + out[(k - 1) % n]) & M32)) & M32
        r4 = (r3 - k % n) & M32
        out[(k + p) % n] ^= r3
        out[(k + q) % n] ^= r4
        out[k % n] = r4
    return out


class MT19937_64:
    N, M = 312, 156

    def __init__(self, seed=None, seed_words=None):
        if seed_words is not None:
            a = seed_seq_generate(seed_words, 2 * self.N)
            self.mt = [a[2 * i] | (a[2 * i + 1] << 32) for i in range(self.N)]
        else:
            self.mt = [seed & M64]
            for i in range(1, self.N):
                prev = self.mt[-1]
                self.mt.append((6364136223846793005 * (prev ^ (prev >> 62)) + i) & M64)
        self.i = self.N

    def _twist(self):
        mt = self.mt
        for i in range(self.N):
            x = (mt[i] & 0xFFFFFFFF80000000) | (mt[(i + 1) % self.N] & 0x7FFFFFFF)
            xa = x >> 1
            if x & 1:
                xa ^= 0xB5026F5AA96619E9
            mt[i] = mt[(i + self.M) % self.N] ^ xa
        self.i = 0

    def __call__(self):
        if self.i >= self.N:
            self._twist()
        y = self.mt[self.i]
        self.i += 1
        y ^= (y >> 29) & 0x5555555555555555
        y ^= (y << 17) & 0x71D67FFFEDA60000
        y ^= (y << 37) & 0xFFF7EEE000000000
        y ^= y >> 43
        return y & M64


def fnv1a64(s):
    h = 0xCBF29CE484222325
    for c in s.encode():
        h ^= c
        h = (h * 0x100000001B3) & M64
    return h


def random_scores(seed, query_id, n):
    h = fnv1a64(query_id)
    g = MT19937_64(seed_words=[seed & M32, seed >> 32, h & M32, h >> 32])
    return [(g() >> 11) * 2.0 ** -53 for _ in range(n)]


if __name__ == "__main__":
    g = MT19937_64(5489)
    for _ in range(9999):
        g()
    assert g() == 9981545732273789042
    print("mt19937_64 check value ok")

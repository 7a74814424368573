n = int(input())
a, b = 0, 1
out = []
while b <= n:
    out.append(a)
    a, b = b, a + b
print(" ".join(map(str, out)))

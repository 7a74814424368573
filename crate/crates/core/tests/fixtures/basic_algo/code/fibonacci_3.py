def fib_upto(n):
    out = []
    a, b = 1, 1
    while a <= n:
        out.append(a)
        a, b = b, a + b
    return out

n = int(input())
print(*fib_upto(n))

def merge(S1, S2):
    res = ""
    n = min(len(S1), len(S2))
    for i in range(n):
        res += S1[i] + S2[i]
    res += S1[n - 1:] + S2[n - 1:]
    return res

S1, S2 = input().split()
print(merge(S1, S2))

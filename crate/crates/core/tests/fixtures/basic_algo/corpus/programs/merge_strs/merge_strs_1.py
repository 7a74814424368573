def merge(S1, S2):
    res = ""
    for i in range(min(len(S1), len(S2))):
        res += S2[i] + S1[i]
    if len(S1) > len(S2):
        res += S1[len(S2):]
    else:
        res += S2[len(S1):]
    return res

S1, S2 = input().split()
print(merge(S1, S2))

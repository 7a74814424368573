open('/tmp/hintgate-escape-test', 'w').write('x')
print('written')

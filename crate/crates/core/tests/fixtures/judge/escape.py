import socket
socket.socket()
print('connected')

# α-IoU Package

# Controllers package initialization
